use thiserror::Error;

/// Errors raised by the solvers in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("ill-posed problem: {0}")]
    IllPosed(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("inner solver failed at t = {t}: {reason}")]
    InnerSolver { t: f64, reason: String },

    #[error(
        "no equilibrium found at t = {t} after {iterations} iterations (last change {last_change:e})"
    )]
    EquilibriumNotFound {
        t: f64,
        iterations: usize,
        last_change: f64,
        last_iterate: Vec<f64>,
    },

    #[error("optimizer did not converge: {0}")]
    NotConverged(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::NumericFailure(msg.into())
    }

    /// Attach a grid time to an error coming out of a per-time solve.
    pub(crate) fn at_time(self, t: f64) -> Self {
        match self {
            e @ (Error::InnerSolver { .. } | Error::EquilibriumNotFound { .. }) => e,
            other => Error::InnerSolver {
                t,
                reason: other.to_string(),
            },
        }
    }
}
