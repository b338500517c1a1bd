use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("metadata error: {0}")]
    Metadata(String),

    #[error("unknown column `{0}` (not declared in metadata)")]
    UnknownColumn(String),

    #[error("value `{value}` at row {row}, column `{column}` does not match kind {kind}")]
    KindMismatch {
        row: usize,
        column: String,
        value: String,
        kind: String,
    },

    #[error("malformed data file: {0}")]
    Malformed(String),

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("empty feature space: every attribute was dropped")]
    EmptyFeatureSpace,

    #[error("class `{0}` is absent, cannot derive class weights")]
    AbsentClass(String),

    #[error("label bit `{0}` is constant in the training data")]
    DegenerateLabel(String),

    #[error("row width {got} does not match model width {expected}")]
    WidthMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("malformed model: {0}")]
    MalformedModel(String),

    #[error("too many features for exact enumeration: {0} (limit 20)")]
    TooManyFeatures(usize),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
