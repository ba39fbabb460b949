use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid machine spec: {field}: {reason}")]
    MachineSpec { field: String, reason: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("header mismatch: expected {expected:?}, found {found:?}")]
    HeaderMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },

    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("schema error: {0}")]
    Schema(String),

    #[error("unsupported model format {found:?} (expected {expected:?})")]
    Version { expected: String, found: String },

    #[error("model kind mismatch: expected {expected}, found {found}")]
    KindMismatch { expected: String, found: String },

    #[error("trace too large: {points} grid points exceeds limit of {limit}")]
    TraceTooLarge { points: u64, limit: u64 },

    #[error("{0}")]
    Eval(String),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn spec(field: &str, reason: impl Into<String>) -> Self {
        Error::MachineSpec {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
