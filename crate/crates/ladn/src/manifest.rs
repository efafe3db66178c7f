//! Run manifests: the resolved command line and input hashes of a run,
//! written next to its outputs so the run can be replayed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_text, sha256_hex, write_text};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seed: Option<u64>,
    /// Full argument list, every option spelled out with its resolved value.
    pub args: Vec<String>,
    /// Every option with its resolved value.
    #[serde(default)]
    pub config: toml::Table,
    /// Input path to SHA-256 of its contents.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(subcommand: &str, seed: Option<u64>, args: Vec<String>) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            seed,
            args,
            config: toml::Table::new(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path, sha256: &str) {
        self.inputs.insert(path.display().to_string(), sha256.into());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Inputs whose current contents no longer match the recorded hash.
    pub fn changed_inputs(&self) -> Vec<String> {
        self.inputs
            .iter()
            .filter(|(path, hash)| {
                std::fs::read(path).map(|bytes| sha256_hex(&bytes) != **hash).unwrap_or(true)
            })
            .map(|(p, _)| p.clone())
            .collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn read(path: &Path) -> Result<Self> {
        toml::from_str(&read_text(path)?).map_err(|e| Error::format(path.display(), e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_toml())
    }
}

/// `<output>.manifest.toml`.
pub fn path_for(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.toml");
    PathBuf::from(s)
}
