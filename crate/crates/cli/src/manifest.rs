use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::Command;
use crate::error::CliError;

pub const TOOL: &str = "subspace-shot";

/// Everything needed to re-run a command and get byte-identical output.
/// Output paths and thread counts are deliberately absent: neither changes
/// what is computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    #[serde(flatten)]
    pub command: Command,
    pub seed: Option<u64>,
    pub inputs: Vec<InputDigest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of_file(path: &Path) -> Result<Self, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        Ok(Self {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

impl RunManifest {
    pub fn new(command: Command, seed: Option<u64>, inputs: Vec<InputDigest>) -> Self {
        Self {
            tool: TOOL.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            seed,
            inputs,
        }
    }

    /// Reads a manifest from a bare manifest file or from any document that
    /// carries one under a top-level `manifest` key.
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut value: serde_json::Value = serde_json::from_str(&text)?;
        if let Some(inner) = value.get_mut("manifest") {
            value = inner.take();
        }
        Ok(serde_json::from_value(value)?)
    }

    /// Fails if any recorded input changed since the manifest was written.
    pub fn verify_inputs(&self) -> Result<(), CliError> {
        for input in &self.inputs {
            let now = InputDigest::of_file(Path::new(&input.path))?;
            if now.sha256 != input.sha256 {
                return Err(CliError::Replay(format!(
                    "input {} changed: recorded sha256 {}, found {}",
                    input.path, input.sha256, now.sha256
                )));
            }
        }
        Ok(())
    }
}
