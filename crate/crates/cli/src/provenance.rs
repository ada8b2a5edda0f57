use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::{CmdResult, Failure};

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub file: String,
    pub sha256: String,
}

/// What produced an output: tool version, command, hashed inputs (by base
/// name) and resolved settings. Contains nothing machine- or time-specific.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub inputs: Vec<InputDigest>,
    pub seed: u64,
    pub config: RunConfig,
}

impl Provenance {
    pub fn new(command: &'static str, inputs: Vec<InputDigest>, config: &RunConfig) -> Self {
        Provenance {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            inputs,
            seed: config.seed,
            config: config.clone(),
        }
    }

    /// The footer line every command prints last on stdout.
    pub fn footer(&self) -> String {
        format!(
            "provenance: {}",
            serde_json::to_string(self).expect("serializable")
        )
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reads a file, returning its bytes and digest record.
pub fn read_input(path: &Path) -> CmdResult<(Vec<u8>, InputDigest)> {
    let bytes = fs::read(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    let digest = InputDigest {
        file: base_name(path),
        sha256: sha256_hex(&bytes),
    };
    Ok((bytes, digest))
}

pub fn base_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn write_output(path: &Path, bytes: &[u8]) -> CmdResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::input(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, bytes)
        .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable");
    out.push(b'\n');
    out
}
