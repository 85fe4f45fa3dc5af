//! Run manifests written next to every output file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub map_digest: Option<String>,
    pub tolerances: BTreeMap<String, f64>,
    pub threads: usize,
    pub fitted_constants: BTreeMap<String, f64>,
    pub wall_time_seconds: f64,
    pub artifact_version: String,
    pub outputs: Vec<String>,
}

/// Accumulates manifest fields while a command runs.
pub struct Run {
    manifest: RunManifest,
    start: Instant,
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

impl Run {
    pub fn new(command_line: Vec<String>, threads: usize, start: Instant) -> Self {
        Run {
            manifest: RunManifest {
                command_line,
                map_digest: None,
                tolerances: BTreeMap::new(),
                threads,
                fitted_constants: BTreeMap::new(),
                wall_time_seconds: 0.0,
                artifact_version: env!("CARGO_PKG_VERSION").to_string(),
                outputs: Vec::new(),
            },
            start,
        }
    }

    pub fn set_digest(&mut self, digest: String) {
        self.manifest.map_digest = Some(digest);
    }

    pub fn tolerance(&mut self, name: &str, v: f64) {
        self.manifest.tolerances.insert(name.to_string(), v);
    }

    pub fn fitted(&mut self, name: &str, v: f64) {
        self.manifest.fitted_constants.insert(name.to_string(), v);
    }

    pub fn output(&mut self, path: &Path) {
        self.manifest.outputs.push(path.display().to_string());
    }

    /// Write one sidecar per recorded output.
    pub fn finish(&mut self) -> anyhow::Result<()> {
        self.manifest.wall_time_seconds = self.start.elapsed().as_secs_f64();
        let text = serde_json::to_string_pretty(&self.manifest)?;
        for out in &self.manifest.outputs {
            let p = sidecar_path(Path::new(out));
            std::fs::write(&p, &text).with_context(|| format!("writing {}", p.display()))?;
        }
        Ok(())
    }
}
