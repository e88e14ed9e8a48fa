use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no unique stationary state: {0}")]
    NoUniqueStationary(String),
    #[error("enumeration too large: {0}")]
    EnumerationTooLarge(String),
    #[error("parameter overflow: exponent {exponent} exceeds {limit}")]
    ParameterOverflow { exponent: f64, limit: f64 },
    #[error("degenerate MPS: {0}")]
    DegenerateMps(String),
    #[error("not a rank-1 MPS: singular value ratio {ratio:e}")]
    NotRank1 { ratio: f64 },
    #[error("nilpotent symbol matrix (trace {trace:e})")]
    Nilpotent { trace: f64 },
    #[error("deterministic limit c = 0, use capacity_rank1")]
    DeterministicLimit,
    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("invalid covariance matrix: {0}")]
    InvalidCovariance(String),
    #[error("no convergence after {iterations} iterations (best residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
