//! Append-only, content-addressed artifact storage with run manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};

/// Bumped whenever an artifact layout changes incompatibly.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRef {
    pub kind: String,
    /// Path relative to the store root.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

pub struct ArtifactStore {
    root: PathBuf,
}

impl ArtifactStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<ArtifactStore> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(ArtifactStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn resolve(&self, r: &ArtifactRef) -> PathBuf {
        self.root.join(&r.path)
    }

    /// Store `bytes` as `<kind>/<kind>-<hash>.<ext>`. An existing file with
    /// that name is never rewritten.
    pub fn put(&self, kind: &str, ext: &str, bytes: &[u8]) -> Result<ArtifactRef> {
        if kind.is_empty() || !kind.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(Error::Argument(format!("invalid artifact kind {kind:?}")));
        }
        let digest = hex::encode(Sha256::digest(bytes));
        let rel = format!("{kind}/{kind}-{}.{ext}", &digest[..16]);
        let path = self.root.join(&rel);
        if path.exists() {
            let existing = std::fs::read(&path)?;
            if existing != bytes {
                return Err(Error::Validation { row: 0, message: format!("artifact {rel} exists with different content") });
            }
        } else {
            std::fs::create_dir_all(path.parent().expect("artifact has a directory"))?;
            // write then rename so a crash never leaves a truncated artifact
            let tmp = path.with_extension(format!("{ext}.partial"));
            std::fs::write(&tmp, bytes)?;
            std::fs::rename(&tmp, &path)?;
        }
        Ok(ArtifactRef { kind: kind.into(), path: rel, sha256: digest, bytes: bytes.len() as u64 })
    }

    pub fn put_json<T: Serialize>(&self, kind: &str, value: &T) -> Result<ArtifactRef> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.put(kind, "json", text.as_bytes())
    }

    pub fn write_manifest(&self, manifest: &Manifest) -> Result<ArtifactRef> {
        self.put_json("manifest", manifest)
    }
}

/// Record of one command: what ran, under which configuration and seeds,
/// and what it produced. Contains nothing time- or host-dependent, so equal
/// runs give equal manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub tool_version: String,
    pub command: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<String>,
    pub artifacts: Vec<ArtifactRef>,
}

impl Manifest {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Manifest {
        Manifest {
            format: FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: cfg.hash(),
            master_seed: cfg.seed,
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn seed(&mut self, name: impl Into<String>, value: u64) -> u64 {
        self.seeds.insert(name.into(), value);
        value
    }

    /// Inputs are recorded by content hash, not path.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        self.inputs.push(hex::encode(Sha256::digest(&bytes)));
        Ok(())
    }

    pub fn add(&mut self, r: ArtifactRef) -> ArtifactRef {
        self.artifacts.push(r.clone());
        r
    }
}
