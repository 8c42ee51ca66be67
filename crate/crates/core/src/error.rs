//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, MonasError>;

#[derive(Debug, Error)]
pub enum MonasError {
    /// A caller broke an operation's preconditions (shapes, stale caches, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("unknown search space `{0}`")]
    UnknownSpace(String),

    #[error("action {action} out of range for slot {slot} ({candidates} candidates)")]
    ActionOutOfRange {
        slot: usize,
        action: usize,
        candidates: usize,
    },

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("evaluation result is missing `{0}`")]
    MissingField(&'static str),

    #[error("architecture not found in lookup table: {0}")]
    NotFound(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: duplicate key {key}")]
    DuplicateKey { line: usize, key: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<MonasError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl MonasError {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        MonasError::Contract(msg.into())
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            MonasError::UnknownSpace(_)
                | MonasError::InvalidArchitecture(_)
                | MonasError::InvalidValue(_)
                | MonasError::Parse { .. }
                | MonasError::DuplicateKey { .. }
                | MonasError::Config(_)
        )
    }
}
