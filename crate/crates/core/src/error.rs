use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}: protected-status value `{value}` is not 0 or 1")]
    NonBinaryPsv { row: usize, value: String },

    #[error("row {row}: label value `{value}` is not 0 or 1")]
    NonBinaryLabel { row: usize, value: String },

    #[error("row {row}, column `{column}`: `{value}` is not a finite number")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("tape does not match this network")]
    StaleTape,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("protected-status variable has a single value ({0}); both groups are required")]
    SinglePsvGroup(u8),

    #[error("labels contain a single class; AUC needs both normal and abnormal instances")]
    SingleClass,

    #[error(
        "scores ranked {k} and {next} are tied at {value}; cannot select exactly {k} positives"
    )]
    ThresholdTie { k: usize, next: usize, value: f64 },

    #[error("non-finite {what} at epoch {epoch} (phase {phase})")]
    NonFiniteLoss {
        what: &'static str,
        phase: &'static str,
        epoch: usize,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
