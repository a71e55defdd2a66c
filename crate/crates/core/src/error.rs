use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid too small for operator order: {operator} needs at least {min} nodes, got {n}")]
    GridTooSmall { operator: &'static str, min: usize, n: usize },

    #[error("unknown {kind} `{name}` (known: {known})")]
    UnknownStrategy { kind: &'static str, name: String, known: String },

    #[error("regularization strength must be non-negative, got {0}")]
    NegativeEpsilon(f64),

    #[error("node index {k} out of range 1..={n}")]
    IndexOutOfRange { k: usize, n: usize },

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },

    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: &'static str, reason: String },

    #[error("Newton matrix is singular at epsilon = {epsilon:e}")]
    SingularMatrix { epsilon: f64 },

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("oracle step size underflow at gamma = {gamma}")]
    StepUnderflow { gamma: f64 },
}

impl Error {
    pub(crate) fn invalid(key: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { key, reason: reason.into() }
    }
}
