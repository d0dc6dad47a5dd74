use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("malformed instrument file {path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },

    #[error("invalid instrument file:\n  {}", .0.join("\n  "))]
    Schema(Vec<String>),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Model(#[from] els_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Model(_) => 1,
            _ => 2,
        }
    }

    pub fn schema(msg: impl Into<String>) -> Self {
        Self::Schema(vec![msg.into()])
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
