//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("row {row}, column `{column}`: `{value}` is not numeric")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("column `{column}` is entirely missing; cannot impute")]
    AllMissing { column: String },

    #[error("missing value at row {row}, column `{column}` (missing-value policy is `reject`)")]
    MissingRejected { row: usize, column: String },

    #[error("target column `{0}` not found")]
    TargetNotFound(String),

    #[error("target has a single class; at least two are required")]
    SingleClass,

    #[error("class {class} has {count} instance(s); at least {required} required")]
    ClassTooSmall {
        class: usize,
        count: usize,
        required: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    TrainingDiverged { epoch: usize },

    #[error("no tree has a non-empty out-of-bag set")]
    NoOutOfBag,

    #[error("selection result is not finalized")]
    NotFinalized,

    #[error("every selection iteration diverged")]
    AllIterationsDiverged,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("test-partition rows {0:?} were read during feature selection")]
    HygieneViolation(Vec<usize>),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors caused by the input data rather than by configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Csv(_)
                | Error::NonNumeric { .. }
                | Error::AllMissing { .. }
                | Error::MissingRejected { .. }
                | Error::TargetNotFound(_)
                | Error::SingleClass
                | Error::ClassTooSmall { .. }
                | Error::InvalidDataset(_)
        )
    }
}
