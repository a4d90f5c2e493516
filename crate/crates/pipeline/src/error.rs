use thiserror::Error;

/// Pipeline-level errors. Validation variants name the offending field so
/// CLI messages can point at the input.
#[derive(Debug, Error)]
pub enum Error {
    #[error("annotation field `{field}`: {reason}")]
    Annotation { field: String, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("optimization diverged at iteration {iteration}: {reason}")]
    Diverged { iteration: usize, reason: String },

    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },

    #[error(transparent)]
    Core(#[from] fur_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
