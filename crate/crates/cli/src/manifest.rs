//! Run manifests: a JSON snapshot of the fully resolved configuration,
//! written before any compute starts and finalized when the run ends, with
//! enough information (seed, config, checkpoint hash) to reproduce the run.

use std::io::Read;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub artifact_version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub config: serde_json::Value,
    pub started_at: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ended_at: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunManifest {
    pub fn start(command: &'static str, seed: u64, config: serde_json::Value) -> Self {
        RunManifest {
            artifact_version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config,
            started_at: chrono::Utc::now().to_rfc3339(),
            status: "running".into(),
            ended_at: None,
            result: None,
            error: None,
        }
    }

    pub fn finish_completed(&mut self, result: serde_json::Value) {
        self.status = "completed".into();
        self.ended_at = Some(chrono::Utc::now().to_rfc3339());
        self.result = Some(result);
    }

    pub fn finish_failed(&mut self, error: &str) {
        self.status = "failed".into();
        self.ended_at = Some(chrono::Utc::now().to_rfc3339());
        self.error = Some(error.to_string());
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text)
            .with_context(|| format!("cannot write manifest {}", path.display()))
    }
}

/// Hex SHA-256 of a file's contents (the checkpoint content hash).
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = std::fs::File::open(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}
