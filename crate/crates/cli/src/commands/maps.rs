use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use critlab::calculus::{fd_gradient, fd_hessian_norm, DiffConfig};
use critlab::dimension::{near_critical_dimension, EpsilonRule, DEFAULT_BOXES_PER_CUBE, DEFAULT_SAMPLES};
use critlab::mapspec::{parse_point, Family};
use critlab::quadrature::{cantor_series, energy as integrate_energy, EnergyParams, Phi, Psi};
use critlab::verify::distortion;
use critlab::Error;
use serde::Serialize;

use super::{point_or, MapArg};
use crate::manifest::Run;
use crate::output::{emit_json, f17, read_spec, write_csv};
use crate::{CmdResult, OutArg, Outcome};

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    map: MapArg,
    /// `x1,...,xn`.
    #[arg(long, allow_hyphen_values = true)]
    point: String,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct EvalReport {
    family: &'static str,
    point: Vec<f64>,
    value: Vec<f64>,
    /// Rows of `Df`.
    df: Vec<Vec<f64>>,
    jac: f64,
    d2_norm: Option<f64>,
    distortion: f64,
}

pub fn eval(a: EvalArgs, run: &mut Run) -> CmdResult {
    let spec = read_spec(&a.map.map, run)?;
    let map = spec.build()?;
    let x = parse_point(&a.point)?;
    let jet = map.jet(&x)?;
    let n = map.dim();
    let report = EvalReport {
        family: map.family(),
        df: (0..n).map(|i| (0..n).map(|j| jet.df[(i, j)]).collect()).collect(),
        jac: jet.jacobian(),
        d2_norm: map.d2_norm(&x).ok(),
        distortion: distortion(map.as_ref(), &x)?,
        value: jet.value,
        point: x,
    };
    emit_json(&report, a.out.out.as_deref(), run)?;
    run.finish()?;
    Ok(Outcome::Done)
}

#[derive(Args, Debug)]
pub struct DiffcheckArgs {
    #[command(flatten)]
    map: MapArg,
    /// CSV with one point per row; a non-numeric first row is taken as a header.
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Finite-difference step.
    #[arg(long, default_value_t = DiffConfig::default().step)]
    step: f64,
    /// Minimum distance to a singular locus.
    #[arg(long, default_value_t = DiffConfig::default().singular_standoff)]
    standoff: f64,
    #[arg(long)]
    no_richardson: bool,
}

fn read_points(path: &PathBuf, n: usize) -> anyhow::Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let joined = rec.iter().collect::<Vec<_>>().join(",");
        match parse_point(&joined) {
            Ok(p) if p.len() == n => out.push(p),
            Ok(p) => {
                return Err(Error::Parse(format!("row {}: expected {n} coordinates, got {}", i + 1, p.len())).into())
            }
            Err(_) if i == 0 => continue,
            Err(e) => return Err(Error::Parse(format!("row {}: {e}", i + 1)).into()),
        }
    }
    Ok(out)
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(f64::MIN_POSITIVE)
}

pub fn diffcheck(a: DiffcheckArgs, run: &mut Run) -> CmdResult {
    let spec = read_spec(&a.map.map, run)?;
    let map = spec.build()?;
    let n = map.dim();
    let cfg = DiffConfig { step: a.step, richardson: !a.no_richardson, singular_standoff: a.standoff };
    cfg.validate()?;
    run.tolerance("step", cfg.step);
    run.tolerance("singularStandoff", cfg.singular_standoff);
    let points = read_points(&a.points, n)?;
    let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    for h in ["jac", "jac_fd", "df_rel_err", "jac_rel_err", "d2_norm", "d2_norm_fd", "d2_rel_err", "status"] {
        header.push(h.to_string());
    }
    let mut rows = Vec::with_capacity(points.len());
    let mut worst: f64 = 0.0;
    for x in &points {
        let mut row: Vec<String> = x.iter().map(|v| f17(Some(*v))).collect();
        let checked = map.jet(x).and_then(|jet| {
            let g = fd_gradient(map.as_ref(), x, &cfg)?;
            Ok((jet, g))
        });
        match checked {
            Ok((jet, g)) => {
                let j = jet.jacobian();
                let jfd = critlab::numeric::linalg::det(&g);
                let df_scale = jet.df.amax();
                let df_err = (&jet.df - &g).amax() / df_scale.max(f64::MIN_POSITIVE);
                let jac_err = rel(j, jfd, j.abs());
                worst = worst.max(df_err).max(jac_err);
                let d2 = jet.d2.as_ref().map(|h| h.max_abs());
                let d2fd = d2.and_then(|_| fd_hessian_norm(map.as_ref(), x, &cfg).ok());
                let d2_err = d2.zip(d2fd).map(|(c, f)| rel(c, f, c.abs()));
                row.extend([
                    f17(Some(j)),
                    f17(Some(jfd)),
                    f17(Some(df_err)),
                    f17(Some(jac_err)),
                    f17(d2),
                    f17(d2fd),
                    f17(d2_err),
                    "ok".into(),
                ]);
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(String::new(), 7));
                row.push(e.to_string());
            }
        }
        rows.push(row);
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&a.out, &header, &rows, run)?;
    run.finish()?;
    eprintln!("{} points, worst first-derivative relative error {worst:e}", points.len());
    Ok(Outcome::Done)
}

#[derive(Args, Debug)]
pub struct EnergyArgs {
    #[command(flatten)]
    map: MapArg,
    #[arg(long)]
    q: f64,
    #[arg(long)]
    a: f64,
    /// Relative tolerance of the adaptive cubature.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[arg(long, default_value_t = 2_000_000)]
    max_cells: usize,
    /// `norm-power` or `frobenius-power`.
    #[arg(long, default_value = "norm-power")]
    psi: String,
    /// `inverse-abs-det` or `zero`.
    #[arg(long, default_value = "inverse-abs-det")]
    phi: String,
    /// Lower corner of the integration box (default: the map's domain box).
    #[arg(long, allow_hyphen_values = true)]
    lo: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    hi: Option<String>,
    /// Per-generation CSV for Cantor maps (default: `<out>.generations.csv`).
    #[arg(long)]
    table: Option<PathBuf>,
    #[command(flatten)]
    out: OutArg,
}

fn kebab<T: serde::de::DeserializeOwned>(s: &str, what: &str) -> anyhow::Result<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| Error::Parse(format!("unknown {what} {s:?}")).into())
}

pub fn energy(a: EnergyArgs, run: &mut Run) -> CmdResult {
    let spec = read_spec(&a.map.map, run)?;
    let mut p = EnergyParams::new(a.q, a.a, a.tol);
    p.max_cells = a.max_cells;
    p.psi = kebab::<Psi>(&a.psi, "psi")?;
    p.phi = kebab::<Phi>(&a.phi, "phi")?;
    p.validate()?;
    run.tolerance("tolRel", a.tol);
    run.tolerance("maxCells", a.max_cells as f64);
    let report = if let Family::Cantor(_) = spec.family {
        if a.lo.is_some() || a.hi.is_some() {
            return Err(Error::InvalidParams("Cantor energies always cover [-1,1]^n".into()).into());
        }
        let s = spec.cantor_schedule()?;
        let r = cantor_series(&s, &p)?;
        if let Some(sum) = &r.series {
            if let Some(c) = sum.fitted_d2_constant {
                run.fitted("d2Constant", c);
            }
            if let Some(c) = sum.fitted_jac_constant {
                run.fitted("jacConstant", c);
            }
        }
        let table = match (&a.table, &a.out.out) {
            (Some(t), _) => Some(t.clone()),
            (None, Some(o)) => Some(o.with_extension("generations.csv")),
            (None, None) => None,
        };
        if let Some(t) = table {
            let header = ["i", "analytic_d2", "analytic_d2_norm", "analytic_jac", "numeric_d2", "numeric_jac"];
            let rows: Vec<Vec<String>> = r
                .per_generation
                .iter()
                .map(|g| {
                    vec![
                        g.i.to_string(),
                        f17(Some(g.analytic_d2_term)),
                        f17(Some(g.analytic_d2_norm_term)),
                        f17(Some(g.analytic_jac_term)),
                        f17(Some(g.numeric_d2)),
                        f17(Some(g.numeric_jac)),
                    ]
                })
                .collect();
            write_csv(&t, &header, &rows, run)?;
        }
        r
    } else {
        let map = spec.build()?;
        let n = map.dim();
        let (dlo, dhi) = map.domain().bounding_box();
        let lo = point_or(a.lo.as_deref(), dlo, n)?;
        let hi = point_or(a.hi.as_deref(), dhi, n)?;
        integrate_energy(map.as_ref(), &p, &lo, &hi)?
    };
    emit_json(&report, a.out.out.as_deref(), run)?;
    run.finish()?;
    if report.converged {
        Ok(Outcome::Done)
    } else {
        Ok(Outcome::BudgetExhausted(format!(
            "cubature stopped before reaching tol {} (d2 converged: {}, jac converged: {})",
            a.tol, report.d2_converged, report.jac_converged
        )))
    }
}

#[derive(Args, Debug)]
pub struct DimensionArgs {
    #[command(flatten)]
    map: MapArg,
    /// Finest grid level: boxes no smaller than `2^(1-depth)`.
    #[arg(long)]
    depth: u32,
    #[arg(long)]
    out: PathBuf,
    /// Fixed threshold on dyadic grids; required for non-Cantor maps.
    #[arg(long)]
    eps: Option<f64>,
    /// Boxes per generation cube side (Cantor maps).
    #[arg(long, default_value_t = DEFAULT_BOXES_PER_CUBE)]
    boxes_per_cube: u32,
    /// Sub-samples per box axis.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: u32,
}

pub fn dimension(a: DimensionArgs, run: &mut Run) -> CmdResult {
    let spec = read_spec(&a.map.map, run)?;
    let map = spec.build()?;
    let (rule, target) = match (&spec.family, a.eps) {
        (_, Some(eps)) => (EpsilonRule::Fixed { eps }, None),
        (Family::Cantor(_), None) => {
            let s = spec.cantor_schedule()?;
            (EpsilonRule::for_schedule(&s, a.boxes_per_cube)?, Some(s.params().d))
        }
        (_, None) => return Err(Error::InvalidParams("--eps is required for non-Cantor maps".into()).into()),
    };
    match &rule {
        EpsilonRule::Fixed { eps } => run.tolerance("eps", *eps),
        EpsilonRule::CantorMatched { c_hat, .. } => run.fitted("jacobianConstant", *c_hat),
    }
    run.tolerance("samplesPerAxis", a.samples as f64);
    let report = near_critical_dimension(map.as_ref(), &rule, a.depth, a.samples, target)?;
    let rows: Vec<Vec<String>> = (0..report.scales.len())
        .map(|i| {
            vec![
                f17(Some(report.scales[i])),
                f17(report.eps.get(i).copied()),
                report.counts[i].to_string(),
                f17(report.running_slope[i]),
            ]
        })
        .collect();
    write_csv(&a.out, &["scale", "eps", "count", "running_slope"], &rows, run)?;
    run.finish()?;
    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Summary<'a> {
        slope: Option<f64>,
        residual: Option<f64>,
        target_d: Option<f64>,
        epsilon_rule: &'a str,
        flag: Option<&'a str>,
    }
    let summary = Summary {
        slope: report.slope,
        residual: report.residual,
        target_d: report.target_d,
        epsilon_rule: &report.epsilon_rule,
        flag: report.flag.as_deref(),
    };
    println!("{}", serde_json::to_string_pretty(&summary).map_err(anyhow::Error::from)?);
    Ok(Outcome::Done)
}
