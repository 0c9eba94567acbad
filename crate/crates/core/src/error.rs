use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// A power-of-two exponent left the signed 64-bit range.
    #[error("exponent out of range: {0}")]
    ExponentRange(String),

    #[error("admissibility violated at n = {n}: {constraint}")]
    Admissibility { n: usize, constraint: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("term {n} requested but the construction has only {len} terms")]
    FiniteConstruction { n: usize, len: usize },

    #[error("LP is infeasible")]
    Infeasible,

    #[error("LP is unbounded")]
    Unbounded,

    #[error("certificate rejected: {0}")]
    Certificate(String),

    #[error("search depth exhausted: {0}")]
    DepthExhausted(String),

    #[error("iteration budget exhausted: {0}")]
    NoConvergence(String),

    #[error("parse error: {0}")]
    Parse(String),
}
