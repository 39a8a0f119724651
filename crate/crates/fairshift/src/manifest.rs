//! Provenance block embedded in every artifact.

use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputHash {
    /// Path as given on the command line.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_sha256: Option<String>,
    pub inputs: Vec<InputHash>,
    pub seed: u64,
    pub tool_version: String,
    /// Seconds since the Unix epoch, taken from `SOURCE_DATE_EPOCH` when it
    /// is set. Left empty otherwise so reruns stay byte-identical.
    pub timestamp: Option<u64>,
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            config_sha256: None,
            inputs: Vec::new(),
            seed,
            tool_version: TOOL_VERSION.to_string(),
            timestamp: std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()),
        }
    }

    pub fn with_config(mut self, path: Option<&Path>) -> anyhow::Result<Self> {
        if let Some(p) = path {
            self.config_sha256 = Some(sha256_file(p)?);
        }
        Ok(self)
    }

    pub fn with_input(mut self, path: &Path) -> anyhow::Result<Self> {
        self.inputs.push(InputHash {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(self)
    }
}

/// JSON envelope shared by every report the tool writes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub schema_version: u32,
    pub manifest: RunManifest,
    #[serde(flatten)]
    pub body: T,
}

pub const ARTIFACT_SCHEMA_VERSION: u32 = 1;

impl<T> Artifact<T> {
    pub fn new(manifest: RunManifest, body: T) -> Self {
        Self {
            schema_version: ARTIFACT_SCHEMA_VERSION,
            manifest,
            body,
        }
    }
}
