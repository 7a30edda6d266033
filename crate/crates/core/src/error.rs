use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("rank deficient: measured rank {measured}, required {required}")]
    RankDeficient { measured: usize, required: usize },

    #[error("infeasible system: least-squares residual {residual:e}")]
    Infeasible { residual: f64 },

    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("construction failed at block {block}: {reason}")]
    Construction { block: usize, reason: String },

    #[error("enumeration budget exceeded: {count} cases, budget {budget}")]
    Budget { count: u128, budget: u128 },

    #[error("insufficient data: {graded_ok} graded samples of {attempted}, need at least {required}")]
    InsufficientData { attempted: usize, graded_ok: usize, required: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("factorization fit {residual:e} exceeds tolerance {tol:e}")]
    PoorFit { residual: f64, tol: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
