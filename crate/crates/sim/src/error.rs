use std::io;
use std::path::{Path, PathBuf};

use fso_core::ConfigError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    /// Malformed flag or config file; exit status 2.
    #[error("usage: {0}")]
    Usage(String),
    #[error("invalid configuration: {0}")]
    Config(ConfigError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("nothing to write: the row list is empty")]
    EmptyOutput,
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl SimError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        SimError::Io { path: path.to_path_buf(), source }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        SimError::Usage(msg.into())
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Usage(_) | SimError::Config(_) => 2,
            _ => 1,
        }
    }
}

impl From<ConfigError> for SimError {
    fn from(e: ConfigError) -> Self {
        SimError::Config(e)
    }
}
