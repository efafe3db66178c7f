//! File helpers shared by the subcommands.

use std::fs;
use std::path::Path;

use ladn_core::ParityCheckMatrix;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `contents`, creating parent directories as needed.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// A parity-check matrix together with the hash of the file it came from.
#[derive(Debug, Clone)]
pub struct CodeFile {
    pub h: ParityCheckMatrix,
    pub sha256: String,
}

pub fn read_code(path: &Path) -> Result<CodeFile> {
    let text = read_text(path)?;
    let h = ParityCheckMatrix::parse_alist(&text)
        .map_err(|e| Error::format(path.display(), e.to_string()))?;
    Ok(CodeFile { h, sha256: sha256_hex(text.as_bytes()) })
}

pub fn write_code(path: &Path, h: &ParityCheckMatrix) -> Result<()> {
    write_text(path, &h.to_alist())
}
