//! Error type shared by every module.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not symmetric: entries [{i}][{j}] = {a} and [{j}][{i}] = {b} differ")]
    NotSymmetric { i: usize, j: usize, a: f64, b: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue} below -{tol}")]
    NotPositiveSemidefinite { eigenvalue: f64, tol: f64 },

    #[error("matrix is not positive definite: smallest eigenvalue {eigenvalue}")]
    NotPositiveDefinite { eigenvalue: f64 },

    #[error("{what} did not converge within the iteration cap of {cap}")]
    NonConvergence { what: &'static str, cap: usize },

    #[error("rank deficiency: {0}")]
    RankDeficient(String),

    #[error("ill-conditioned inversion: condition estimate {cond:.3e}")]
    IllConditioned { cond: f64 },

    #[error("unsupported regime: {0}")]
    RegimeUnsupported(String),

    #[error("no certified tail bound applies: {0}")]
    TailRegime(String),

    #[error("{what} exceeds the configured cap of {cap}")]
    CapExceeded { what: String, cap: u64 },

    #[error("integrand evaluation failed: {0}")]
    Evaluation(String),

    #[error("internal inconsistency: {0}")]
    Internal(String),
}
