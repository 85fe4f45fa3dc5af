use std::path::Path;

use anyhow::Context;
use critlab::mapspec::MapSpec;
use serde::Serialize;

use crate::manifest::Run;

pub fn read_spec(path: &Path, run: &mut Run) -> anyhow::Result<MapSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec = MapSpec::from_json(&text)?;
    run.set_digest(spec.digest()?);
    Ok(spec)
}

/// Pretty JSON to `out`, or to stdout when no path is given.
pub fn emit_json<T: Serialize>(value: &T, out: Option<&Path>, run: &mut Run) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => {
            std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?;
            run.output(p);
        }
        None => println!("{text}"),
    }
    Ok(())
}

/// CSV rows to `path`; the first row is the header.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>], run: &mut Run) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    run.output(path);
    Ok(())
}

/// 17 significant digits, empty for `None`.
pub fn f17(v: Option<f64>) -> String {
    v.map(critlab::regimes::fmt17).unwrap_or_default()
}
