use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlpodsError {
    /// A required column is missing or the declared schema does not match the file.
    #[error("schema error: {0}")]
    Schema(String),

    /// A cell could not be parsed; the row number is 1-based including the header.
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    /// The data violates a structural invariant (e.g. one case with two class labels).
    #[error("integrity error: {0}")]
    Integrity(String),

    /// An operation received invalid input.
    #[error("input error: {0}")]
    Input(String),

    /// No informative classifier is available to vote.
    #[error("abstain: {0}")]
    Abstain(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, AlpodsError>;
