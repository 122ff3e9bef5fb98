use thiserror::Error;

/// Errors produced by map construction, potentials and the pressure estimators.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Argument outside the domain of an operation (bad alpha, point outside the interval, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A potential (or log|Df|) was evaluated at or next to one of its singular points.
    #[error("singularity at x = {x}: {detail}")]
    Singularity { x: f64, detail: String },

    /// Enumeration outgrew the configured node budget.
    #[error("budget of {budget} nodes exceeded at level {failed_level} (deepest completed level {deepest_level})")]
    Budget {
        budget: usize,
        failed_level: usize,
        deepest_level: usize,
    },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("divergent series: {0}")]
    Divergence(String),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Expression or descriptor could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Short machine-readable tag, used in error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Singularity { .. } => "singularity",
            Error::Budget { .. } => "budget",
            Error::Convergence { .. } => "convergence",
            Error::Precondition(_) => "precondition",
            Error::Divergence(_) => "divergence",
            Error::Construction(_) => "construction",
            Error::Infeasible(_) => "infeasible",
            Error::Unsupported(_) => "unsupported",
            Error::Parse(_) => "parse",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
