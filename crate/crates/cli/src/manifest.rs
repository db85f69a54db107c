use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use hdts_core::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct OutputEntry {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one invocation, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub command: String,
    /// SHA-256 of the config file bytes, or of the effective settings when no file was given.
    pub config_digest: String,
    pub base_seed: u64,
    pub threads: Option<usize>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<OutputEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn now_unix() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

impl RunManifest {
    pub fn new(command: &str, config_bytes: &[u8], base_seed: u64, threads: Option<usize>, started_unix: f64) -> Self {
        Self {
            tool: "hdts",
            tool_version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_digest: sha256_hex(config_bytes),
            base_seed,
            threads,
            started_unix,
            finished_unix: started_unix,
            outputs: Vec::new(),
        }
    }

    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        self.outputs.push(OutputEntry {
            path: path.to_path_buf(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn write(mut self, path: &Path) -> Result<()> {
        self.finished_unix = now_unix();
        hdts_core::io::write_json(&self, path)
    }
}
