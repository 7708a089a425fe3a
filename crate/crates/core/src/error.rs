use thiserror::Error;

/// Errors raised by the estimators, resamplers and classifiers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("class {class} has {got} case(s), need at least {min}")]
    TooFewCases { class: u8, got: usize, min: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(
        "no usable bootstrap replicate: all {dropped} replicate(s) excluded no case of some class"
    )]
    NoUsableReplicates { dropped: usize },

    #[error("statistic is not functional: value changed from {original} to {duplicated} when every case was duplicated")]
    NotFunctional { original: f64, duplicated: f64 },

    #[error("training failed: {0}")]
    Training(String),

    #[error("i/o: {0}")]
    Io(String),

    #[error("trial {trial} (seed {seed}) failed: {source}")]
    TrialFailed {
        trial: usize,
        seed: u64,
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
