//! Run manifests: everything needed to repeat a command bit-exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    /// Full command configuration.
    pub config: serde_json::Value,
    /// Input path to SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Output path, relative to the run directory, to SHA-256.
    pub outputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_unix_s: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_unix_s: Option<u64>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    pub fn new<C: Serialize>(command: &str, seed: Option<u64>, config: &C, inputs: &[PathBuf]) -> Result<Self> {
        let mut hashes = BTreeMap::new();
        for p in inputs {
            hashes.insert(p.display().to_string(), sha256_file(p)?);
        }
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config: serde_json::to_value(config)?,
            inputs: hashes,
            outputs: BTreeMap::new(),
            started_unix_s: None,
            finished_unix_s: None,
        })
    }

    /// Hashes the listed outputs under `dir`.
    pub fn record_outputs(&mut self, dir: &Path, outputs: &[PathBuf]) -> Result<()> {
        for rel in outputs {
            let key = rel.to_string_lossy().replace('\\', "/");
            self.outputs.insert(key, sha256_file(&dir.join(rel))?);
        }
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        fs::write(dir.join(MANIFEST_FILE), text).with_context(|| format!("writing manifest in {}", dir.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Inputs whose current hash differs from the recorded one.
    pub fn changed_inputs(&self) -> Vec<String> {
        self.inputs
            .iter()
            .filter(|(p, h)| sha256_file(Path::new(p)).ok().as_ref() != Some(*h))
            .map(|(p, _)| p.clone())
            .collect()
    }

    /// Outputs that differ between two manifests of the same command.
    pub fn output_differences(&self, other: &RunManifest) -> Vec<String> {
        let mut keys: Vec<&String> = self.outputs.keys().chain(other.outputs.keys()).collect();
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .filter(|k| self.outputs.get(*k) != other.outputs.get(*k))
            .cloned()
            .collect()
    }
}
