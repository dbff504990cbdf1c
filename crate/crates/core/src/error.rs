use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("denominator is not positive (g = {0:e})")]
    NonPositiveDenominator(f64),

    #[error("state is infeasible (h = +inf)")]
    InfeasibleState,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("k = {k} is outside 1..={n}")]
    BadK { k: usize, n: usize },

    #[error("bad dimensions: {0}")]
    BadDimensions(String),

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{path}:{line}: feature indices must be strictly increasing")]
    IndexOutOfOrder { path: PathBuf, line: usize },

    #[error("matrix has no nonzero entries")]
    ZeroMatrix,

    #[error("matrix is rank deficient (lambda_min = {lambda_min:e}, lambda_max = {lambda_max:e})")]
    RankDeficient { lambda_min: f64, lambda_max: f64 },

    #[error("vector is zero")]
    ZeroVector,

    #[error("gradient vanished")]
    ZeroGradient,

    #[error("candidate set is empty")]
    EmptyCandidates,

    #[error("all polynomial coefficients are zero")]
    DegenerateAllZero,

    #[error("ratio subproblem is unbounded below (a2 = {0:e})")]
    UnboundedBelow(f64),

    #[error("{method} is not provided for {problem}")]
    UnsupportedVariant {
        method: &'static str,
        problem: &'static str,
    },

    #[error("h has no closed-form proximal operator for this problem")]
    ProxUnavailable,

    #[error("point classification is limited to n <= {max} (got {n})")]
    DimensionTooLarge { n: usize, max: usize },

    #[error("invariant violated at iteration {iteration}: {details}")]
    AssertionFailure { iteration: u64, details: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
