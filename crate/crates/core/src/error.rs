use std::path::PathBuf;

/// Errors produced by the workbench library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid channel profile: {0}")]
    InvalidProfile(String),

    #[error("invalid impairment configuration: {0}")]
    InvalidImpairment(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    Version { expected: u32, found: u32 },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("model error: {0}")]
    Model(String),

    #[error("missing artifact {path}: {what}")]
    MissingArtifact { path: PathBuf, what: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
