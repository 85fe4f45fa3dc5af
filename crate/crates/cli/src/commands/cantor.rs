use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Subcommand};
use critlab::mapspec::{parse_point, MapSpec, Scalar};
use serde::Serialize;

use crate::manifest::Run;
use crate::output::{emit_json, f17, read_spec, write_csv};
use crate::{CmdResult, OutArg, Outcome};

#[derive(Subcommand, Debug)]
pub enum CantorCommand {
    /// Build a schedule and write it as a map spec.
    Build(BuildArgs),
    /// Evaluate the map of a schedule at one point.
    Eval(EvalArgs),
    /// List the cube/rectangle pairs of one generation.
    Cells(CellsArgs),
}

#[derive(Args, Debug)]
pub struct BuildArgs {
    #[arg(long)]
    n: usize,
    /// Decimal or p/q; kept exact in the written spec.
    #[arg(long)]
    d: String,
    #[arg(long)]
    q: String,
    #[arg(long)]
    a: String,
    /// Number of generations.
    #[arg(long)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Map spec written by `cantor build`.
    #[arg(long)]
    sched: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    point: String,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
pub struct CellsArgs {
    #[arg(long)]
    sched: PathBuf,
    #[arg(long)]
    gen: usize,
    #[arg(long)]
    out: PathBuf,
}

pub fn run(c: CantorCommand, run: &mut Run) -> CmdResult {
    match c {
        CantorCommand::Build(a) => build(a, run),
        CantorCommand::Eval(a) => eval(a, run),
        CantorCommand::Cells(a) => cells(a, run),
    }
}

fn build(a: BuildArgs, run: &mut Run) -> CmdResult {
    let spec = MapSpec::cantor(a.n, Scalar::Text(a.d), Scalar::Text(a.q), Scalar::Text(a.a), a.k);
    let schedule = spec.cantor_schedule()?;
    std::fs::write(&a.out, spec.to_json()? + "\n").with_context(|| format!("writing {}", a.out.display()))?;
    run.set_digest(spec.digest()?);
    run.output(&a.out);
    run.finish()?;
    println!("{}", serde_json::to_string_pretty(&schedule.summary()).map_err(anyhow::Error::from)?);
    Ok(Outcome::Done)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct PointReport {
    point: Vec<f64>,
    value: Vec<f64>,
    jac: f64,
    /// Bound on `|D²f|` assembled from the profile and cutoff terms.
    d2_bound: f64,
    /// Generation whose map is active at the point.
    level: usize,
}

fn eval(a: EvalArgs, run: &mut Run) -> CmdResult {
    let spec = read_spec(&a.sched, run)?;
    let s = spec.cantor_schedule()?;
    let x = parse_point(&a.point)?;
    let (value, jac, d2_bound) = s.eval(&x)?;
    let level = s.descend(&x)?.level;
    emit_json(&PointReport { point: x, value, jac, d2_bound, level }, a.out.out.as_deref(), run)?;
    run.finish()?;
    Ok(Outcome::Done)
}

fn cells(a: CellsArgs, run: &mut Run) -> CmdResult {
    let spec = read_spec(&a.sched, run)?;
    let s = spec.cantor_schedule()?;
    let cells = s.cells(a.gen)?;
    let n = s.n();
    let mut header: Vec<String> = vec!["generation".into(), "word".into()];
    header.extend((1..=n).map(|j| format!("z{j}")));
    header.extend((1..=n).map(|j| format!("zt{j}")));
    for h in ["q_half", "q_outer_half", "r_half_bar", "r_half_last", "r_outer_half_bar", "r_outer_half_last"] {
        header.push(h.into());
    }
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            let word = c
                .word
                .iter()
                .map(|letter| letter.iter().map(|s| if *s > 0 { '+' } else { '-' }).collect::<String>())
                .collect::<Vec<_>>()
                .join(" ");
            let mut r = vec![c.generation.to_string(), word];
            r.extend(c.zv.iter().map(|v| f17(Some(*v))));
            r.extend(c.ztv.iter().map(|v| f17(Some(*v))));
            for v in [c.q_half, c.q_outer_half, c.r_half.0, c.r_half.1, c.r_outer_half.0, c.r_outer_half.1] {
                r.push(f17(Some(v)));
            }
            r
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&a.out, &header, &rows, run)?;
    run.finish()?;
    eprintln!("{} cells of generation {} written to {}", cells.len(), a.gen, a.out.display());
    Ok(Outcome::Done)
}
