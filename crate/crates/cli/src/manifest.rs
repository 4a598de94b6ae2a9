//! Run manifests: the resolved configuration snapshot plus content hashes of
//! every input file, written into each run directory. A rerun from a manifest
//! reproduces the run byte-for-byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// Fully resolved command configuration; reruns consume this verbatim.
    pub config: serde_json::Value,
    /// Input path -> SHA-256 of the file contents.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes =
        fs::read(path).with_context(|| format!("cannot read input file {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn hash_inputs(paths: &[PathBuf]) -> Result<BTreeMap<String, String>> {
    let mut inputs = BTreeMap::new();
    for path in paths {
        inputs.insert(path.display().to_string(), file_sha256(path)?);
    }
    Ok(inputs)
}

impl Manifest {
    pub fn new(
        command: &str,
        seed: u64,
        config: serde_json::Value,
        inputs: BTreeMap<String, String>,
        outputs: Vec<String>,
    ) -> Self {
        Self {
            tool: "gradeshield".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config,
            inputs,
            outputs,
        }
    }

    pub fn write(&self, run_dir: &Path) -> Result<()> {
        let path = run_dir.join("manifest.json");
        let json = serde_json::to_string_pretty(self)?;
        fs::write(&path, json + "\n")
            .with_context(|| format!("cannot write manifest {}", path.display()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = fs::read_to_string(path)
            .with_context(|| format!("cannot read manifest {}", path.display()))?;
        serde_json::from_str(&content)
            .with_context(|| format!("malformed manifest {}", path.display()))
    }

    /// Verify that every recorded input file still has the recorded hash.
    pub fn verify_inputs(&self) -> Result<()> {
        for (path, expected) in &self.inputs {
            let actual = file_sha256(Path::new(path))?;
            if &actual != expected {
                bail!(
                    "input file {path} changed since the manifest was written \
                     (recorded {expected}, found {actual})"
                );
            }
        }
        Ok(())
    }
}

/// Write pretty JSON with a trailing newline (stable bytes for reruns).
pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    fs::write(path, json + "\n").with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}
