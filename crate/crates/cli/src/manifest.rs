//! Run manifests: what a command was asked to do and what it wrote.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub tool_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub wall_ms: f64,
    pub exit_code: i32,
    /// Every artifact the command wrote, manifest excluded.
    pub results: Vec<PathBuf>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub summary: serde_json::Value,
}

/// SHA-256 of the compact JSON form.
pub fn digest<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    hex::encode(Sha256::digest(bytes))
}

pub struct Recorder {
    started: Instant,
    pub manifest: RunManifest,
}

impl Recorder {
    pub fn new(command: &str) -> Self {
        Recorder {
            started: Instant::now(),
            manifest: RunManifest {
                command: command.to_string(),
                argv: std::env::args().collect(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                config: None,
                config_digest: None,
                seed: None,
                wall_ms: 0.0,
                exit_code: 0,
                results: Vec::new(),
                summary: serde_json::Value::Null,
            },
        }
    }

    pub fn config<T: Serialize>(&mut self, cfg: &T) {
        self.manifest.config = Some(serde_json::to_value(cfg).expect("config serializes"));
        self.manifest.config_digest = Some(digest(cfg));
    }

    /// Writes `contents` and lists the file.
    pub fn write(&mut self, path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
        std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.results.push(path.to_path_buf());
        Ok(())
    }

    pub fn listed(&mut self, path: &Path) {
        self.manifest.results.push(path.to_path_buf());
    }

    /// Writes `run-<command>.json` into `dir`.
    pub fn finish(mut self, dir: &Path, exit_code: i32) -> anyhow::Result<PathBuf> {
        self.manifest.wall_ms = self.started.elapsed().as_secs_f64() * 1e3;
        self.manifest.exit_code = exit_code;
        let path = dir.join(format!("run-{}.json", self.manifest.command));
        let text = serde_json::to_string_pretty(&self.manifest)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
