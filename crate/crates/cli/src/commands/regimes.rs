use clap::Args;
use critlab::regimes::{self, RangeSpec, RegimeParams};
use serde::Serialize;

use crate::manifest::Run;
use crate::output::{emit_json, write_csv};
use crate::{CmdResult, OutArg, Outcome};

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[arg(long)]
    n: u32,
    /// Decimal or p/q; classified in exact rational arithmetic.
    #[arg(long)]
    q: String,
    #[arg(long)]
    a: String,
    #[arg(long)]
    d: String,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    n: u32,
    /// `lo:hi:step` or a single value.
    #[arg(long)]
    q: String,
    #[arg(long)]
    a: String,
    #[arg(long)]
    d: String,
    #[arg(long)]
    out: std::path::PathBuf,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ClassifyRow {
    params: RegimeParams,
    #[serde(flatten)]
    verdict: regimes::RegimeVerdict,
    exponents: regimes::DerivedExponents,
}

pub fn classify(a: ClassifyArgs, run: &mut Run) -> CmdResult {
    let p = RegimeParams::parse(a.n, &a.q, &a.a, &a.d)?;
    let row = ClassifyRow { verdict: regimes::classify(&p), exponents: regimes::derive_exponents(&p), params: p };
    emit_json(&row, a.out.out.as_deref(), run)?;
    run.finish()?;
    Ok(Outcome::Done)
}

pub fn sweep(a: SweepArgs, run: &mut Run) -> CmdResult {
    let rows = regimes::sweep(a.n, &RangeSpec::parse(&a.q)?, &RangeSpec::parse(&a.a)?, &RangeSpec::parse(&a.d)?)?;
    let header: Vec<&str> = regimes::CSV_HEADER.split(',').collect();
    let body: Vec<Vec<String>> =
        rows.iter().map(|r| r.csv_line().split(',').map(str::to_string).collect()).collect();
    write_csv(&a.out, &header, &body, run)?;
    run.finish()?;
    eprintln!("{} rows written to {}", rows.len(), a.out.display());
    Ok(Outcome::Done)
}
