use thiserror::Error;

/// Errors surfaced by the laboratory routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("mesh width h = {h} does not divide {what} within 1e-9 relative")]
    MisalignedMesh { h: f64, what: &'static str },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected} nodal values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("linear solver stagnated after {iterations} iterations (residual {residual:.3e})")]
    SolverStagnation { iterations: usize, residual: f64 },
    #[error("{what} did not converge within {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error(
        "monotonicity violated at level n = {level}: drop {violation:.3e} exceeds {tolerance:.3e}"
    )]
    MonotonicityViolation {
        level: u64,
        violation: f64,
        tolerance: f64,
    },
    #[error("fiber projection failed: {0}")]
    ProjectionFailure(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
