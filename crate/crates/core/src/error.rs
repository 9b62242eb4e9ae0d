use thiserror::Error;

#[derive(Debug, Error)]
pub enum EdcrError {
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("line {line}: duplicate record key (sample_id={sample_id:?}, model_id={model_id:?})")]
    DuplicateKey {
        line: usize,
        sample_id: String,
        model_id: String,
    },

    #[error("rule {rule} references unknown condition {condition:?}")]
    UnknownCondition { rule: String, condition: String },

    #[error("invalid rule: {0}")]
    InvalidRule(String),

    #[error("logs do not share records: {0}")]
    KeyMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsatisfiable planted condition {condition:?}: {reason}")]
    Unsatisfiable { condition: String, reason: String },

    #[error("candidate set too large for exhaustive search: {size} > {limit}")]
    TooManyCandidates { size: usize, limit: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, EdcrError>;
