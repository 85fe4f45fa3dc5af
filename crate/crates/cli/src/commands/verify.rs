use clap::{Args, Subcommand};
use critlab::mapspec::parse_point;
use critlab::verify::{
    degree_2d, distortion, find_mollification_radius, grid_preimage_count, injectivity_scan, rectangle_loop,
    sign_constancy_scan, ApproxCheckConfig,
};
use critlab::Error;
use serde::Serialize;

use super::{point_or, MapArg};
use crate::manifest::Run;
use crate::output::{emit_json, read_spec};
use crate::{CmdResult, OutArg, Outcome};

#[derive(Subcommand, Debug)]
pub enum VerifyCommand {
    /// Grid search for distinct points with nearly equal images.
    Injectivity(ScanArgs),
    /// Winding number around a target (n = 2) or grid preimage count (n >= 3).
    Degree(DegreeArgs),
    /// Fractions of the grid where the Jacobian is positive or negative.
    Signs(SignArgs),
    /// Mollify on a planar box and check Jacobian, distance, and injectivity.
    Mollify(MollifyArgs),
    /// `|Df|^n / J` at one point.
    Distortion(DistortionArgs),
}

#[derive(Args, Debug)]
pub struct BoxArgs {
    /// Lower corner of the scan box (default: the map's domain box).
    #[arg(long, allow_hyphen_values = true)]
    lo: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    hi: Option<String>,
}

#[derive(Args, Debug)]
pub struct ScanArgs {
    #[command(flatten)]
    map: MapArg,
    #[command(flatten)]
    region: BoxArgs,
    /// Grid points per axis.
    #[arg(long, default_value_t = 256)]
    res: usize,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
pub struct DegreeArgs {
    #[command(flatten)]
    map: MapArg,
    /// Target point `y`.
    #[arg(long, allow_hyphen_values = true)]
    target: String,
    /// Loop rectangle (n = 2) or scan box (n >= 3).
    #[command(flatten)]
    region: BoxArgs,
    /// Loop samples per rectangle side (n = 2).
    #[arg(long, default_value_t = 2000)]
    per_side: usize,
    /// Grid points per axis for the preimage count (n >= 3).
    #[arg(long, default_value_t = 64)]
    res: usize,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
pub struct SignArgs {
    #[command(flatten)]
    map: MapArg,
    #[command(flatten)]
    region: BoxArgs,
    #[arg(long, default_value_t = 256)]
    res: usize,
    /// Jacobians within `tol` of zero count as zero.
    #[arg(long, default_value_t = 0.0)]
    tol: f64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
pub struct MollifyArgs {
    #[command(flatten)]
    map: MapArg,
    /// Lower corner of the planar box `G`.
    #[arg(long, allow_hyphen_values = true)]
    lo: String,
    #[arg(long, allow_hyphen_values = true)]
    hi: String,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    eta: f64,
    /// Initial kernel radius.
    #[arg(long)]
    radius: f64,
    /// Halvings of the kernel radius to try after the first.
    #[arg(long, default_value_t = 0)]
    halvings: usize,
    #[arg(long, default_value_t = 64)]
    res: usize,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
pub struct DistortionArgs {
    #[command(flatten)]
    map: MapArg,
    #[arg(long, allow_hyphen_values = true)]
    point: String,
    #[command(flatten)]
    out: OutArg,
}

fn scan_box(map: &dyn critlab::maps::Mapping, b: &BoxArgs) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
    let n = map.dim();
    let (lo, hi) = map.domain().bounding_box();
    Ok((point_or(b.lo.as_deref(), lo, n)?, point_or(b.hi.as_deref(), hi, n)?))
}

fn planar(s: &str) -> anyhow::Result<[f64; 2]> {
    let p = point_or(Some(s), Vec::new(), 2)?;
    Ok([p[0], p[1]])
}

pub fn run(c: VerifyCommand, run: &mut Run) -> CmdResult {
    match c {
        VerifyCommand::Injectivity(a) => {
            let map = read_spec(&a.map.map, run)?.build()?;
            let (lo, hi) = scan_box(map.as_ref(), &a.region)?;
            run.tolerance("res", a.res as f64);
            let r = injectivity_scan(map.as_ref(), &lo, &hi, a.res)?;
            run.tolerance("imageTol", r.tol);
            emit_json(&r, a.out.out.as_deref(), run)?;
        }
        VerifyCommand::Degree(a) => {
            let map = read_spec(&a.map.map, run)?.build()?;
            let (lo, hi) = scan_box(map.as_ref(), &a.region)?;
            let y = parse_point(&a.target)?;
            if map.dim() == 2 {
                if y.len() != 2 {
                    return Err(Error::InvalidParams("target must have 2 coordinates".into()).into());
                }
                let curve = rectangle_loop([lo[0], lo[1]], [hi[0], hi[1]], a.per_side);
                let r = degree_2d(map.as_ref(), &curve, [y[0], y[1]])?;
                emit_json(&r, a.out.out.as_deref(), run)?;
            } else {
                #[derive(Serialize)]
                #[serde(rename_all = "camelCase")]
                struct Unsigned {
                    method: &'static str,
                    #[serde(flatten)]
                    report: critlab::verify::PreimageCountReport,
                }
                run.tolerance("res", a.res as f64);
                let report = grid_preimage_count(map.as_ref(), &lo, &hi, a.res, &y)?;
                emit_json(&Unsigned { method: "unsigned-grid-preimage-count", report }, a.out.out.as_deref(), run)?;
            }
        }
        VerifyCommand::Signs(a) => {
            let map = read_spec(&a.map.map, run)?.build()?;
            let (lo, hi) = scan_box(map.as_ref(), &a.region)?;
            run.tolerance("res", a.res as f64);
            run.tolerance("jacTol", a.tol);
            let r = sign_constancy_scan(map.as_ref(), &lo, &hi, a.res, a.tol)?;
            emit_json(&r, a.out.out.as_deref(), run)?;
        }
        VerifyCommand::Mollify(a) => {
            let map = read_spec(&a.map.map, run)?.build()?;
            let cfg = ApproxCheckConfig { delta: a.delta, eta: a.eta, kernel_radius: a.radius };
            run.tolerance("delta", a.delta);
            run.tolerance("eta", a.eta);
            let attempts = find_mollification_radius(map.as_ref(), &cfg, planar(&a.lo)?, planar(&a.hi)?, a.res, a.halvings)?;
            if let Some(last) = attempts.last() {
                run.fitted("kernelRadius", last.kernel_radius);
            }
            emit_json(&attempts, a.out.out.as_deref(), run)?;
        }
        VerifyCommand::Distortion(a) => {
            let map = read_spec(&a.map.map, run)?.build()?;
            let x = parse_point(&a.point)?;
            #[derive(Serialize)]
            struct D {
                point: Vec<f64>,
                distortion: f64,
            }
            let k = distortion(map.as_ref(), &x)?;
            emit_json(&D { point: x, distortion: k }, a.out.out.as_deref(), run)?;
        }
    }
    run.finish()?;
    Ok(Outcome::Done)
}
