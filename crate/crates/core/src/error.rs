use thiserror::Error;

/// Errors raised by the solvers and the run harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain specification: {0}")]
    InvalidDomain(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("point outside the grid's domain: ({0}, {1})")]
    OutsideDomain(f64, f64),
    #[error("undefined arithmetic: {0}")]
    Undefined(String),
    #[error("boundary data violates its flags: {0}")]
    InvalidTrace(String),
    #[error("data is not quasibounded at the current quadrature resolution: {0}")]
    NotQuasibounded(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
