use thiserror::Error;

use crate::policy::SolveReport;

/// Errors produced by the rate model and the allocation solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("multiplier bracket failure: spent power {spent} at λ = {lambda:e} does not straddle the budget {budget}")]
    Bracket {
        lambda: f64,
        spent: f64,
        budget: f64,
    },

    #[error("bisection did not converge in {iterations} iterations (bracket [{lo:e}, {hi:e}])")]
    MaxIterations { iterations: usize, lo: f64, hi: f64 },

    #[error("no sign change for the tangency condition of state {state} on [0, {upper:e}]")]
    NoSignChange { state: usize, upper: f64 },

    #[error("{states} channel states exceed the exhaustive-search cap of {cap}; use the iterative algorithm instead")]
    Capacity { states: usize, cap: usize },

    #[error("all {starts} optimizer starts failed to converge")]
    NonConvergence {
        starts: usize,
        best: Box<SolveReport>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
