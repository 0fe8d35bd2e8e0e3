//! Run manifest: what a command produced and under which settings.
//!
//! Every artifact is listed with a SHA-256 content hash, so a report
//! directory can be checked for bit-level reproducibility against a
//! rerun of the same config and seed. Wall-clock timings are the one
//! intentionally non-reproducible field.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ArtifactEntry {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config_path: Option<String>,
    pub seed: u64,
    pub out_dir: String,
    /// Effective configuration, fully expanded.
    pub config: BTreeMap<String, String>,
    /// `completed`, or `aborted at stage <name>: <error>`.
    pub status: String,
    /// On failure, artifacts written before the abort are retained and
    /// listed here; nothing is deleted.
    pub cleanup_policy: String,
    pub artifacts: Vec<ArtifactEntry>,
    /// Stage name -> seconds.
    pub timings: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(subcommand: &str, seed: u64, out_dir: &Path) -> Self {
        Self {
            tool: "optikan".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            config_path: None,
            seed,
            out_dir: out_dir.display().to_string(),
            config: BTreeMap::new(),
            status: "completed".into(),
            cleanup_policy:
                "partial artifacts from an aborted run are retained and listed as-is".into(),
            artifacts: Vec::new(),
            timings: BTreeMap::new(),
        }
    }

    /// Hashes and records one produced file.
    pub fn record_artifact(&mut self, out_dir: &Path, path: &Path) -> std::io::Result<()> {
        let bytes = std::fs::read(path)?;
        let digest = Sha256::digest(&bytes);
        let rel = path
            .strip_prefix(out_dir)
            .unwrap_or(path)
            .display()
            .to_string();
        self.artifacts.push(ArtifactEntry {
            path: rel,
            sha256: format!("{digest:x}"),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn record_timing(&mut self, stage: &str, seconds: f64) {
        self.timings.insert(stage.into(), seconds);
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    /// Artifact paths resolved against the output directory.
    pub fn artifact_paths(&self, out_dir: &Path) -> Vec<PathBuf> {
        self.artifacts.iter().map(|a| out_dir.join(&a.path)).collect()
    }
}

/// Hex SHA-256 of a file (reproducibility checks).
pub fn file_sha256(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}
