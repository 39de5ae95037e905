//! Artifact directory: atomic JSON writes and per-stage manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Written after a stage finishes; a stage whose manifest matches the
/// current config hash and whose artifacts all exist is skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub config_hash: String,
    pub seed: u64,
    pub stage_seed: u64,
    pub artifacts: Vec<String>,
}

pub struct Store {
    dir: PathBuf,
}

pub fn hash_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl Store {
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{name}.json"))
    }

    pub fn exists(&self, name: &str) -> bool {
        self.path(name).is_file()
    }

    /// Serialize to a sibling temp file, then rename over the target.
    pub fn write<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json {
            path: path.clone(),
            source,
        })?;
        text.push('\n');
        let tmp = self.dir.join(format!(".{name}.json.tmp"));
        fs::write(&tmp, text)
            .and_then(|_| fs::rename(&tmp, &path))
            .map_err(|source| CliError::Io { path, source })
    }

    pub fn read<T: DeserializeOwned>(&self, name: &str) -> Result<T> {
        let path = self.path(name);
        let bytes = fs::read(&path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        serde_json::from_slice(&bytes).map_err(|source| CliError::Json { path, source })
    }

    /// Read an artifact produced by `upstream`, or fail naming that stage.
    pub fn require<T: DeserializeOwned>(&self, stage: &'static str, upstream: &'static str, name: &str) -> Result<T> {
        if !self.exists(name) {
            return Err(CliError::MissingStage {
                stage,
                upstream,
                path: self.path(name),
            });
        }
        self.read(name)
    }

    fn manifest_name(stage: &str) -> String {
        format!("{stage}.manifest")
    }

    pub fn manifest(&self, stage: &str) -> Option<Manifest> {
        self.read(&Self::manifest_name(stage)).ok()
    }

    /// True when `stage` already ran with this hash and left every artifact.
    pub fn is_current(&self, stage: &str, config_hash: &str) -> bool {
        self.manifest(stage)
            .is_some_and(|m| m.config_hash == config_hash && m.artifacts.iter().all(|a| self.exists(a)))
    }

    pub fn write_manifest(&self, manifest: &Manifest) -> Result<()> {
        self.write(&Self::manifest_name(&manifest.stage), manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_read_and_manifest_currency() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        store.write("a", &vec![1.5f64, -2.0]).unwrap();
        assert_eq!(store.read::<Vec<f64>>("a").unwrap(), vec![1.5, -2.0]);
        assert!(!dir.path().join(".a.json.tmp").exists());
        let m = Manifest {
            stage: "sample".into(),
            config_hash: hash_json(&"x"),
            seed: 1,
            stage_seed: 2,
            artifacts: vec!["a".into()],
        };
        store.write_manifest(&m).unwrap();
        assert!(store.is_current("sample", &m.config_hash));
        assert!(!store.is_current("sample", &hash_json(&"y")));
        std::fs::remove_file(store.path("a")).unwrap();
        assert!(!store.is_current("sample", &m.config_hash));
        assert!(matches!(
            store.require::<Vec<f64>>("explain", "train-gnn", "gnn_x"),
            Err(CliError::MissingStage { upstream: "train-gnn", .. })
        ));
    }
}
