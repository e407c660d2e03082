//! Every command writes one run manifest next to its artifacts: what ran,
//! a platform-stable digest of its effective configuration, the seed, and
//! the files it produced.

use anyhow::Result;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub started: String,
    pub finished: String,
    pub artifacts: Vec<String>,
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub struct ManifestBuilder {
    command: String,
    config_text: String,
    seed: u64,
    started: chrono::DateTime<chrono::Utc>,
    artifacts: Vec<String>,
}

impl ManifestBuilder {
    /// `config_text` must be the canonical key=value rendering of every
    /// effective option so reruns with equal settings share a digest.
    pub fn new(command: &str, config_text: String, seed: u64) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            config_text,
            seed,
            started: chrono::Utc::now(),
            artifacts: Vec::new(),
        }
    }

    pub fn artifact(&mut self, path: &Path) {
        self.artifacts.push(path.display().to_string());
    }

    pub fn write(self, dir: &Path) -> Result<()> {
        let manifest = RunManifest {
            command: self.command,
            config_digest: format!("{:016x}", fnv1a64(self.config_text.as_bytes())),
            seed: self.seed,
            started: self.started.to_rfc3339(),
            finished: chrono::Utc::now().to_rfc3339(),
            artifacts: self.artifacts,
        };
        let path = dir.join("run_manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }
}
