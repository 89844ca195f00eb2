//! Run manifests: configuration echo, timings, diagnostics and a SHA-256
//! checksum for every artifact.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the run directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: String,
    pub wall_time_s: f64,
    pub diagnostics: serde_json::Map<String, serde_json::Value>,
    pub artifacts: Vec<Artifact>,
}

impl Manifest {
    pub fn new(command: &str, config_toml: String) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: config_toml,
            wall_time_s: 0.0,
            diagnostics: serde_json::Map::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn note(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.diagnostics.insert(key.to_string(), value.into());
    }

    /// Record a file written under `dir`.
    pub fn add_artifact(&mut self, dir: &Path, file: &Path) -> Result<()> {
        let full = dir.join(file);
        let bytes = std::fs::read(&full).map_err(|e| Error::io(&full, e))?;
        self.artifacts.push(Artifact {
            path: file.to_string_lossy().into_owned(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))
    }

    /// Recompute every checksum and report the first mismatch.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for a in &self.artifacts {
            let full = dir.join(&a.path);
            let bytes = std::fs::read(&full).map_err(|e| Error::io(&full, e))?;
            if sha256_hex(&bytes) != a.sha256 {
                return Err(Error::Format(format!("checksum mismatch for {}", a.path)));
            }
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        write!(s, "{b:02x}").unwrap();
    }
    s
}
