//! Output directory bookkeeping, CSV/JSON writers and the run manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::hex;
use crate::RunError;

/// Fixed 17-significant-digit rendering used in every numeric output.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

/// In-memory CSV table with a fixed header.
#[derive(Debug, Clone)]
pub struct Csv {
    columns: usize,
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            columns: header.len(),
            text: format!("{}\n", header.join(",")),
        }
    }

    pub fn row(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.columns);
        let cells: Vec<String> = values.iter().map(|v| num(*v)).collect();
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    /// Row with pre-rendered cells (labels, empty fields).
    pub fn row_cells(&mut self, cells: &[String]) {
        debug_assert_eq!(cells.len(), self.columns);
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub experiment: String,
    pub config_digest: String,
    pub config: String,
    pub tool_version: String,
    pub wall_time_seconds: f64,
    /// Conventions chosen where the model leaves freedom (e.g. offset direction).
    pub conventions: Vec<(String, String)>,
    pub files: Vec<FileRecord>,
}

/// Writes files under one directory and records their digests in order.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileRecord>,
    conventions: Vec<(String, String)>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, RunError> {
        std::fs::create_dir_all(root).map_err(|source| RunError::Io {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
            conventions: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), RunError> {
        let path = self.root.join(name);
        std::fs::write(&path, contents).map_err(|source| RunError::Io { path, source })?;
        self.files.push(FileRecord {
            path: name.to_string(),
            sha256: hex(&Sha256::digest(contents.as_bytes())),
            bytes: contents.len(),
        });
        Ok(())
    }

    pub fn csv(&mut self, name: &str, csv: &Csv) -> Result<(), RunError> {
        self.write(name, csv.as_str())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| RunError::Numeric {
            context: name.into(),
            message: e.to_string(),
        })?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn convention(&mut self, key: &str, value: &str) {
        self.conventions.push((key.to_string(), value.to_string()));
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    /// Writes `manifest.json` (not itself listed) and returns the manifest.
    pub fn finish(
        self,
        experiment: &str,
        config_digest: String,
        config: String,
        wall_time_seconds: f64,
    ) -> Result<RunManifest, RunError> {
        let manifest = RunManifest {
            experiment: experiment.to_string(),
            config_digest,
            config,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_seconds,
            conventions: self.conventions,
            files: self.files,
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| RunError::Numeric {
            context: "manifest.json".into(),
            message: e.to_string(),
        })?;
        text.push('\n');
        let path = self.root.join("manifest.json");
        std::fs::write(&path, text).map_err(|source| RunError::Io { path, source })?;
        Ok(manifest)
    }
}

/// Finite `f64` for JSON; non-finite values become `null`.
pub fn json_num(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}
