use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two operands disagree on one named dimension.
    #[error("{op}: {dim} mismatch (expected {expected}, found {found})")]
    ShapeMismatch {
        op: &'static str,
        dim: String,
        expected: usize,
        found: usize,
    },

    #[error("{op}: {reason}")]
    InvalidShape { op: &'static str, reason: String },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("spatial extent {extent} is not divisible by {required} (stride {stride} over {stages} resampling stages)")]
    Indivisible {
        extent: usize,
        required: usize,
        stride: usize,
        stages: usize,
    },

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("pgm: {0}")]
    Pgm(#[from] PgmError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

/// Failures while decoding a binary PGM (P5) file.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum PgmError {
    #[error("unsupported netpbm variant {0:?} (only binary P5 is read)")]
    UnsupportedVariant(String),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported maxval {0} (only 255 is accepted)")]
    UnsupportedMaxval(u32),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn arg(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn shape(op: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidShape {
            op,
            reason: reason.into(),
        }
    }

    pub(crate) fn mismatch(
        op: &'static str,
        dim: impl Into<String>,
        expected: usize,
        found: usize,
    ) -> Self {
        Error::ShapeMismatch {
            op,
            dim: dim.into(),
            expected,
            found,
        }
    }
}
