use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("window too narrow: discarded weight {tail:e} exceeds tolerance {tol:e}")]
    WindowTooNarrow { tail: f64, tol: f64 },

    #[error("parameter mismatch: {0}")]
    Mismatch(String),

    #[error("root finder did not converge after {0} iterations")]
    Convergence(usize),

    #[error("aliasing: band limit {band} exceeds grid capacity {capacity}")]
    Aliasing { band: usize, capacity: usize },

    #[error("singular region: {} excluded (l, phi-index) cells", .0.len())]
    SingularRegion(Vec<(i64, usize)>),

    #[error("empty mixture")]
    EmptyMixture,

    #[error("truncation leakage {leakage:e} exceeds budget {budget:e}")]
    Leakage { leakage: f64, budget: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
