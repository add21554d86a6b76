use std::io;
use std::path::Path;

use serde_json::json;
use subspace_shot_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("replay: {0}")]
    Replay(String),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) => match e {
                CoreError::InfeasibleSpec(_) => "infeasible_spec",
                CoreError::MagicMismatch { .. }
                | CoreError::Truncated { .. }
                | CoreError::BankDimMismatch(_)
                | CoreError::NegativeEntry { .. }
                | CoreError::NonFiniteEntry { .. }
                | CoreError::EmptyBankClass(_)
                | CoreError::InvalidBank(_)
                | CoreError::Utf8(_)
                | CoreError::Csv(_) => "bank",
                CoreError::Io(_) => "io",
                CoreError::InvalidConfig(_) => "config",
                _ => "solver",
            },
            CliError::Io { .. } => "io",
            CliError::Json(_) => "json",
            CliError::Replay(_) => "replay",
        }
    }

    pub fn to_json(&self) -> String {
        json!({ "error": { "kind": self.kind(), "message": self.to_string() } }).to_string()
    }
}
