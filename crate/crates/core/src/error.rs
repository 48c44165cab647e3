use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ground mismatch: {left} vs {right}")]
    GroundMismatch { left: usize, right: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("enumeration too large: {count} items exceeds cap {cap}")]
    EnumerationTooLarge { count: u128, cap: u128 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("pad or swap: cost matrix has {rows} rows but only {cols} columns")]
    PadOrSwap { rows: usize, cols: usize },

    #[error("no separating projection after {attempts} attempts; best attempt left {unseparated} extreme pairs unseparated, first: {s} vs {t}")]
    AttemptsExhausted {
        attempts: usize,
        unseparated: usize,
        s: String,
        t: String,
    },

    #[error("target function is not monotone: f({s}) > f({t}) although {s} ⊆ {t}")]
    NotMonotone { s: String, t: String },

    #[error("embedding is not MAS: {0}")]
    NotMas(String),

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("no data")]
    NoData,

    #[error("duplicate id: {0}")]
    DuplicateId(String),

    #[error("checkpoint mismatch: index built with {expected}, got {found}")]
    CheckpointMismatch { expected: String, found: String },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
