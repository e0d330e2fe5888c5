//! Run provenance: the canonical config hash and the `manifest.json` record.

use anyhow::Result;
use mvflow::flow::{FlowConfig, Termination};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// What `manifest.json` records about one run: enough to tie the artifacts
/// in the directory back to the exact configuration and code version that
/// produced them. Wall-clock time lives here and only here, so every other
/// artifact is bitwise reproducible.
#[derive(Serialize)]
pub struct RunManifest {
    /// SHA-256 of the canonicalized config; see [`config_hash`].
    pub config_hash: String,
    /// Version of the binary that produced the artifacts.
    pub artifact_version: &'static str,
    /// The canonical config itself, defaults filled in.
    pub config: FlowConfig,
    /// Relative paths of every file written, in write order.
    pub outputs: Vec<String>,
    pub wall_seconds: f64,
    pub termination: Termination,
}

/// Hashes the semantic content of a config: the parsed struct is
/// re-serialized with sorted keys and no whitespace, so formatting,
/// member order, and spelled-out defaults all hash identically, while any
/// meaningful field change gives a different digest.
pub fn config_hash(config: &FlowConfig) -> Result<String> {
    let value = serde_json::to_value(config)?;
    let canonical = serde_json::to_string(&value)?;
    let digest = Sha256::digest(canonical.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}
