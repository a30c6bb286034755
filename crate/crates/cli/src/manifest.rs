use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use brainib_core::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Record of one command invocation, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub output_dir: PathBuf,
    /// Output path relative to `output_dir` mapped to its SHA-256 digest.
    pub artifacts: BTreeMap<String, String>,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: Option<u64>, output_dir: &Path) -> Self {
        Self {
            command: command.to_owned(),
            config,
            seed,
            inputs: Vec::new(),
            output_dir: output_dir.to_owned(),
            artifacts: BTreeMap::new(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn add_artifacts(&mut self, paths: &[PathBuf]) -> Result<()> {
        for p in paths {
            let rel = p
                .strip_prefix(&self.output_dir)
                .unwrap_or(p)
                .to_string_lossy()
                .replace('\\', "/");
            self.artifacts.insert(rel, sha256_file(p)?);
        }
        Ok(())
    }

    pub fn write(&self) -> Result<PathBuf> {
        let path = self.output_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidArgument(format!("manifest: {e}")))?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
