//! Experiment harness for critical Galton–Watson chains with immigration.
//!
//! An experiment is described by an [`config::ExperimentConfig`], run by
//! [`experiments::run_experiment`], and produces a [`report::Report`] plus
//! CSV artifacts that [`write_outputs`] puts on disk.

pub mod config;
pub mod experiments;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};

use experiments::Artifact;
use report::Report;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(String),
}

impl HarnessError {
    /// Process exit code. Run failures are reported through
    /// [`report::Status::exit_code`] instead.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Io(_) | HarnessError::Csv(_) => 1,
        }
    }
}

/// Write `report.json` and every artifact into `dir`, creating it if needed.
/// Returns the paths written.
pub fn write_outputs(
    report: &Report,
    artifacts: &[Artifact],
    dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(artifacts.len() + 1);
    let json = serde_json::to_vec_pretty(report).map_err(|e| HarnessError::Csv(e.to_string()))?;
    let path = dir.join("report.json");
    fs::write(&path, json)?;
    written.push(path);
    for a in artifacts {
        let path = dir.join(&a.file);
        fs::write(&path, &a.bytes)?;
        written.push(path);
    }
    Ok(written)
}
