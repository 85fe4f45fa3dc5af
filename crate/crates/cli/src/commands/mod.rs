pub mod cantor;
pub mod maps;
pub mod regimes;
pub mod verify;

use std::path::PathBuf;

use clap::Args;

/// Map spec input shared by the map-level commands.
#[derive(Args, Debug, Clone)]
pub struct MapArg {
    /// JSON map spec: {"family", "n", "params"}.
    #[arg(long)]
    pub map: PathBuf,
}

/// Parse an optional point flag, defaulting to `fallback`.
pub fn point_or(s: Option<&str>, fallback: Vec<f64>, n: usize) -> anyhow::Result<Vec<f64>> {
    let p = match s {
        Some(s) => critlab::mapspec::parse_point(s)?,
        None => fallback,
    };
    if p.len() != n {
        return Err(critlab::Error::InvalidParams(format!("expected {n} coordinates, got {}", p.len())).into());
    }
    Ok(p)
}
