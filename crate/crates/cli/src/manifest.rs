//! Per-run manifest: resolved config, build hash and produced files.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub code_version: String,
    /// SHA-256 of the running executable.
    pub build_sha256: String,
    pub config: BTreeMap<String, Value>,
    /// Settings that do not affect the results.
    pub execution: BTreeMap<String, Value>,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub summary: Value,
}

pub fn build_hash() -> Result<String, CliError> {
    let exe = std::env::current_exe()?;
    let bytes = std::fs::read(exe)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Fails if `dir` already holds a manifest and `force` is not set.
pub fn claim_output_dir(dir: &Path, force: bool) -> Result<(), CliError> {
    if dir.join(MANIFEST_FILE).exists() && !force {
        return Err(CliError::Usage(format!(
            "{} already contains {MANIFEST_FILE}; pass --force to overwrite",
            dir.display()
        )));
    }
    std::fs::create_dir_all(dir)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Value, CliError> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}
