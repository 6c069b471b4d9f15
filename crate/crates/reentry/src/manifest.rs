//! Run manifests: enough to replay a command and check its inputs.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use reentry_core::time::format_epoch;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::{sha256_file, write_json};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Days between 1970-01-01 and 2000-01-01.
const UNIX_TO_J2000_DAYS: f64 = 10_957.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Full argument vector, program name first.
    pub argv: Vec<String>,
    pub config_hash: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub seed: u64,
    pub tool_version: String,
    pub started_utc: String,
    pub finished_utc: String,
}

pub fn now_utc() -> String {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    format_epoch(secs / 86_400.0 - UNIX_TO_J2000_DAYS)
}

pub fn digests(paths: &[PathBuf]) -> Result<Vec<FileDigest>> {
    paths.iter().map(|p| Ok(FileDigest { path: p.clone(), sha256: sha256_file(p)? })).collect()
}

impl RunManifest {
    pub fn start(command: &str, argv: &[String], config_hash: String, seed: u64, inputs: &[PathBuf]) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            argv: argv.to_vec(),
            config_hash,
            inputs: digests(inputs)?,
            outputs: Vec::new(),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_utc: now_utc(),
            finished_utc: String::new(),
        })
    }

    /// Stamps the end time, hashes the outputs and writes the manifest
    /// atomically to `path`.
    pub fn finish(mut self, outputs: &[PathBuf], path: &Path) -> Result<Self> {
        self.outputs = digests(outputs)?;
        self.finished_utc = now_utc();
        write_json(path, &self)?;
        Ok(self)
    }

    /// Inputs whose current digest differs from the recorded one.
    pub fn changed_inputs(&self) -> Result<Vec<PathBuf>> {
        let mut changed = Vec::new();
        for d in &self.inputs {
            if sha256_file(&d.path).ok().as_deref() != Some(d.sha256.as_str()) {
                changed.push(d.path.clone());
            }
        }
        Ok(changed)
    }
}
