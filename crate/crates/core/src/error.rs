use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    Shape {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("allocation is not a distribution: {0}")]
    Allocation(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("degenerate matrix: {0}")]
    Degenerate(&'static str),

    #[error("stale cache: {0}")]
    StaleCache(&'static str),

    #[error("replay buffer holds {have} experiences, need {need}")]
    InsufficientExperience { have: usize, need: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("invariant violated at step {step}: {what}")]
    Audit { step: u64, what: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
