use thiserror::Error;

use crate::grid::Point;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("point ({}, {}) lies outside the unit square", .0.x, .0.y)]
    OutOfDomain(Point),

    #[error("solver did not converge after {iterations} iterations (final residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("u2 must be strictly positive, found {value:e} at node ({i}, {j})")]
    PositivityViolation { i: usize, j: usize, value: f64 },

    #[error("|u| = {value:e} at covered node ({i}, {j}) is too small to divide by")]
    Degeneracy { i: usize, j: usize, value: f64 },

    #[error("propagating D broke down at ({}, {}): non-finite coefficient or D out of range", .0.x, .0.y)]
    Propagation(Point),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
