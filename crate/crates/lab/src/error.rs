//! Lab-side errors and the CLI exit-code contract.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at {path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad config: {0}")]
    Config(String),
    #[error("checkpoint format error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Core(#[from] rijepa_core::Error),
}

impl LabError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io { path: path.into(), source }
    }

    /// Stable contract: 0 success, 2 config/input error, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Core(rijepa_core::Error::NonFinite { .. })
            | LabError::Core(rijepa_core::Error::Diverged { .. }) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
