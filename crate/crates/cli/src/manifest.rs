use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
}

/// Traces one command's artifacts back to its configuration and seeds.
/// Holds no timestamps so reruns reproduce it exactly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seeds: BTreeMap<String, Vec<u64>>,
    pub versions: BTreeMap<String, String>,
    pub outputs: Vec<OutputEntry>,
}

/// Writes artifacts under one directory and records their digests.
pub struct OutputDir {
    root: PathBuf,
    entries: Vec<OutputEntry>,
}

impl OutputDir {
    pub fn new(root: &Path) -> OutputDir {
        OutputDir {
            root: root.to_path_buf(),
            entries: Vec::new(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, rel: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(&path, e))?;
        }
        std::fs::write(&path, contents.as_ref()).map_err(|e| CliError::io(&path, e))?;
        self.entries.push(OutputEntry {
            path: rel.to_string(),
            sha256: sha256_hex(contents.as_ref()),
        });
        Ok(path)
    }

    /// Records files written by other code (for example a CSV bundle).
    pub fn record_existing(&mut self, rel: &str) -> Result<(), CliError> {
        let path = self.root.join(rel);
        let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        self.entries.push(OutputEntry {
            path: rel.to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn finish(
        mut self,
        command: &str,
        config_canonical: &str,
        seeds: BTreeMap<String, Vec<u64>>,
    ) -> Result<RunManifest, CliError> {
        self.entries.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = RunManifest {
            command: command.to_string(),
            config_hash: sha256_hex(config_canonical.as_bytes()),
            seeds,
            versions: versions(),
            outputs: self.entries,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        let path = self.root.join(MANIFEST_FILE);
        std::fs::create_dir_all(&self.root).map_err(|e| CliError::io(&self.root, e))?;
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        (
            "nocturne".to_string(),
            env!("CARGO_PKG_VERSION").to_string(),
        ),
        (
            "feature_registry".to_string(),
            nocturne::features::REGISTRY_VERSION.to_string(),
        ),
        (
            "model_format".to_string(),
            nocturne::models::io::FORMAT_VERSION.to_string(),
        ),
    ])
}
