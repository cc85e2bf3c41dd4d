//! Experiment pipelines, file formats and the `bohmflow` command line.

use std::path::{Path, PathBuf};
use std::time::Instant;

pub mod config;
pub mod experiments;
pub mod output;
pub mod statefile;
pub mod svg;

pub use config::{Experiment, ExperimentConfig};
pub use output::{FileRecord, RunManifest};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error("experiment `{experiment}` has no key `{key}`")]
    UnknownKey { experiment: String, key: String },
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("config line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("state `{path}`: {source}")]
    State {
        path: String,
        #[source]
        source: statefile::StateFileError,
    },
    #[error("{context}: {message}")]
    Numeric { context: String, message: String },
}

impl RunError {
    pub(crate) fn numeric(context: impl Into<String>, err: impl std::fmt::Display) -> Self {
        RunError::Numeric {
            context: context.into(),
            message: err.to_string(),
        }
    }
}

/// Runs one experiment, writing its data files and `manifest.json` into `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest, RunError> {
    let started = Instant::now();
    let mut out = output::OutputDir::create(out_dir)?;
    experiments::dispatch(config, &mut out)?;
    out.finish(
        config.experiment.name(),
        config.digest(),
        config.canonical(),
        started.elapsed().as_secs_f64(),
    )
}

/// `(name, description)` for every experiment.
pub fn list_experiments() -> Vec<(&'static str, &'static str)> {
    Experiment::ALL.iter().map(|e| (e.name(), e.description())).collect()
}
