use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] oel_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed artifact: {reason}")]
    Artifact { path: PathBuf, reason: String },
    #[error("inconsistent results: {0}")]
    Inconsistent(String),
    #[error("no results to summarize")]
    Empty,
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.to_path_buf(), source }
    }

    pub fn artifact(path: &Path, reason: impl ToString) -> Self {
        HarnessError::Artifact { path: path.to_path_buf(), reason: reason.to_string() }
    }
}

impl From<oel_core::ConfigError> for HarnessError {
    fn from(e: oel_core::ConfigError) -> Self {
        HarnessError::Core(e.into())
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
