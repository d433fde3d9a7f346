//! Run manifest written next to every set of outputs.

use periprop::config::SimConfig;
use periprop::meshgen::{write_mesh_string, AxiMesh};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::Path;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: &'static str,
    /// Effective configuration after flag overrides.
    pub config: SimConfig,
    /// SHA-256 of the mesh text prefixed by a git-style `blob <len>\0` header.
    pub mesh_hash: String,
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
}

/// Content hash of a mesh in the canonical text format.
pub fn mesh_hash(mesh: &AxiMesh) -> String {
    let text = write_mesh_string(mesh);
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", text.len()).as_bytes());
    hasher.update(text.as_bytes());
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(dir.join(MANIFEST_FILE), text + "\n")
    }
}
