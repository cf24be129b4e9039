use std::path::PathBuf;

/// Errors raised by the optimization toolkit and its time-series objective.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("domain cardinality overflows u64")]
    CardinalityOverflow,

    #[error("coordinate {value} out of bounds for dimension `{dim}` (0..={max})")]
    OutOfBounds { dim: String, value: i64, max: usize },

    #[error("value {value} is not a member of dimension `{dim}`")]
    UnknownValue { dim: String, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("duplicate design point at index {0}")]
    DuplicatePoint(usize),

    #[error("design is not invertible: rank(P) = {rank} < {required}")]
    NonInvertibleDesign { rank: usize, required: usize },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("not enough points: need at least {required}, got {got}")]
    TooFewPoints { required: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("search space exhausted: every lattice point has been evaluated")]
    Exhausted,

    #[error("objective failed: {0}")]
    Objective(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("series error: {0}")]
    Series(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
