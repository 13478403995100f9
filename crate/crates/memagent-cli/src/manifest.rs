//! Run manifests: every command records its configuration, seeds, input
//! hashes, and the hash of every file it wrote. Re-running a command with
//! identical inputs and a deterministic gateway reproduces identical output
//! hashes.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub input_hashes: Vec<OutputEntry>,
    pub outputs: Vec<OutputEntry>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

pub struct ManifestBuilder {
    command: String,
    config: serde_json::Value,
    seed: Option<u64>,
    inputs: Vec<OutputEntry>,
    outputs: Vec<OutputEntry>,
    started_unix_ms: u128,
}

impl ManifestBuilder {
    pub fn new(command: &str, config: serde_json::Value, seed: Option<u64>) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            config,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_unix_ms: now_ms(),
        }
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(hash_file(path)?);
        Ok(())
    }

    pub fn record_output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(hash_file(path)?);
        Ok(())
    }

    /// Write `manifest.json` into `dir` and return the manifest.
    pub fn write(self, dir: &Path) -> Result<RunManifest> {
        let finished = now_ms();
        let mut hasher = Sha256::new();
        hasher.update(self.command.as_bytes());
        hasher.update(self.config.to_string().as_bytes());
        hasher.update(self.started_unix_ms.to_le_bytes());
        let run_id = hex(&hasher.finalize()[..8]);
        let manifest = RunManifest {
            run_id,
            command: self.command,
            config: self.config,
            seed: self.seed,
            input_hashes: self.inputs,
            outputs: self.outputs,
            started_unix_ms: self.started_unix_ms,
            finished_unix_ms: finished,
        };
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(manifest)
    }
}

pub fn hash_file(path: &Path) -> Result<OutputEntry> {
    let data = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    let mut hasher = Sha256::new();
    hasher.update(&data);
    Ok(OutputEntry {
        path: path.display().to_string(),
        sha256: hex(&hasher.finalize()),
        bytes: data.len() as u64,
    })
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}
