use thiserror::Error;

/// Errors raised by state validation, channels, measures and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("trace is {0}, expected 1")]
    InvalidTrace(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("vector is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("invalid parameter `{name}`: {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("rank {rank} is not in 1..={dim}")]
    InvalidRank { rank: usize, dim: usize },

    #[error("Kraus operators are not complete (deviation {0:e})")]
    IncompleteKraus(f64),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal mass {off:e})")]
    EigenNoConvergence { sweeps: usize, off: f64 },

    #[error("{measure} requires a pure state (purity {purity})")]
    NotPure { measure: &'static str, purity: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("solver did not converge: best value {best}, residual {residual:e}")]
    NoConvergence { best: f64, residual: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("operation family is empty")]
    EmptyFamily,

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
