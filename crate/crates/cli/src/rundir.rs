//! Run directories and manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use debias_core::experiment::content_digest;
use debias_core::{Error, Result};
use serde::Serialize;

/// Output directory of one run. Without `force` it must not already hold files,
/// so earlier checkpoints and reports are never silently replaced.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path, force: bool) -> Result<Self> {
        if root.exists() {
            if !root.is_dir() {
                return Err(Error::Config(format!("{} exists and is not a directory", root.display())));
            }
            let occupied = fs::read_dir(root)?.next().is_some();
            if occupied && !force {
                return Err(Error::Config(format!(
                    "run directory {} is not empty; choose a fresh directory or pass --force",
                    root.display()
                )));
            }
        }
        fs::create_dir_all(root)?;
        Ok(RunDir { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let p = self.path(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&p, bytes)?;
        Ok(p)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

/// Everything that determines a run's outputs. No timestamps, so equal
/// manifests mean equal runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub config: BTreeMap<String, String>,
    pub inputs: BTreeMap<String, InputRecord>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Manifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: None,
            config: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, role: &str, path: &Path, bytes: &[u8]) {
        self.inputs.insert(
            role.to_string(),
            InputRecord {
                path: path.display().to_string(),
                sha256: content_digest(bytes),
            },
        );
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.config.insert(key.to_string(), value.to_string());
    }
}
