use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = SppError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SppError {
    #[error("invalid array shape: {0}")]
    InvalidShape(String),

    #[error("dimension index {index} out of range for a {ndim}-dimensional array")]
    DimensionOutOfRange { index: usize, ndim: usize },

    #[error("position out of range: {0}")]
    OutOfRange(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("patch index {index} out of range ({count} patches)")]
    PatchIndex { index: usize, count: usize },

    #[error("operation requires a 2-dimensional array, got {0} dimensions")]
    NotTwoDimensional(usize),

    #[error("sub-array is not aligned to a boundary of the outer array in dimension {0}")]
    UnalignedSubArray(usize),

    #[error("at least {min} draws required, got {got}")]
    InsufficientDraws { min: usize, got: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty input")]
    EmptyInput,

    #[error("AUC needs both positive and negative labels")]
    SingleClass,

    #[error("unknown node id {0:?}")]
    UnknownNode(String),

    #[error("unsupported file version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("corrupt model file: {0}")]
    Corrupt(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SppError::Io {
            path: path.into(),
            source,
        }
    }
}
