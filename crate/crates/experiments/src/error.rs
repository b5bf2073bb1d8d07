use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

pub type Result<T, E = ExpError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ExpError {
    #[error(transparent)]
    Core(#[from] dipbias_core::Error),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("worker pool: {0}")]
    Pool(String),
}

impl ExpError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        ExpError::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ExpError::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            ExpError::Core(dipbias_core::Error::NonFiniteLoss { .. }) => "non_finite_loss",
            ExpError::Core(dipbias_core::Error::Pgm(_)) => "pgm",
            ExpError::Core(dipbias_core::Error::Io { .. }) | ExpError::Io { .. } => "io",
            ExpError::Core(_) => "invalid_input",
            ExpError::Config(_) => "config",
            ExpError::Csv { .. } => "csv",
            ExpError::Json { .. } => "json",
            ExpError::Pool(_) => "pool",
        }
    }

    /// The record printed on stderr when the CLI fails.
    pub fn record(&self) -> ErrorRecord {
        ErrorRecord {
            error: self.kind(),
            message: self.to_string(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub error: &'static str,
    pub message: String,
}
