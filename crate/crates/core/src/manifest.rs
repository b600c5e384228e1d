//! Record of one run: configuration, outcome and written files.

use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::experiments::{Check, ReplicaStatus, Report, CSV_SCHEMA};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub circsine: &'static str,
    pub csv_schema: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub experiment: &'static str,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub versions: Versions,
    /// Seconds since the Unix epoch at the start of the run.
    pub started_unix: f64,
    pub wall_clock_secs: f64,
    pub passed: bool,
    pub numerical_failure: bool,
    pub exit_code: i32,
    pub checks: Vec<Check>,
    pub replicas: Vec<ReplicaStatus>,
    /// Paths relative to the output directory.
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(cfg: &ExperimentConfig, report: &Report, started: SystemTime, elapsed: Duration, exit_code: i32) -> Self {
        RunManifest {
            experiment: cfg.experiment.name(),
            config: cfg.clone(),
            config_hash: cfg.hash(),
            versions: Versions { circsine: env!("CARGO_PKG_VERSION"), csv_schema: CSV_SCHEMA },
            started_unix: started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
            wall_clock_secs: elapsed.as_secs_f64(),
            passed: report.passed(),
            numerical_failure: report.numerical_failure,
            exit_code,
            checks: report.checks.clone(),
            replicas: report.replicas.clone(),
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

/// Writes every table as `<name>.csv` and every figure under its file name.
/// Returns the written paths relative to `dir`.
pub fn write_outputs(report: &Report, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for t in &report.tables {
        let name = PathBuf::from(format!("{}.csv", t.name));
        let f = std::io::BufWriter::new(std::fs::File::create(dir.join(&name))?);
        t.write_csv(f)?;
        out.push(name);
    }
    for (name, svg) in &report.figures {
        std::fs::write(dir.join(name), svg)?;
        out.push(PathBuf::from(name));
    }
    Ok(out)
}
