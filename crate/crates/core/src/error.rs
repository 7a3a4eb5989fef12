use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix contains NaN or infinite entries")]
    NonFinite,
    #[error("rank {rank} is invalid for dimension {dim}")]
    InvalidRank { rank: usize, dim: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("matrix must be square and non-empty, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("zero matrix cannot be normalized")]
    ZeroMatrix,
    #[error("query direction lies (numerically) in the null space of the metric")]
    DegenerateDirection,
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("measurement budget {total} is smaller than the averaging parameter {m}")]
    BudgetTooSmall { total: usize, m: usize },
    #[error("truncation threshold {tau} is below the required minimum {minimum}")]
    PreconditionViolated { tau: f64, minimum: f64 },
    #[error("backtracking line search underflowed the step size")]
    NoProgress,
    #[error("response {index} is zero; direct sensing divides by it")]
    ZeroResponse { index: usize },
    #[error("moment of order {power} does not exist in dimension {dim}")]
    InvalidDim { dim: usize, power: u32 },
    #[error("truncation property {property} violated at index {index}")]
    PropertyViolated { property: &'static str, index: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
