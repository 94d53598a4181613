use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("{what} = {value} is outside {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    /// The prior specification itself is malformed.
    #[error("invalid prior specification: {0}")]
    InvalidSpec(String),

    /// A required integral diverges (or is not supported in its boundary form).
    #[error("integral is not finite: {0}")]
    Integrability(String),

    /// Minimaxity checks only cover priors with 0 < b < 1 and a < 1.
    #[error("relaxed prior (a = {a}, b = {b}) is outside the certified family; need a < 1 and 0 < b < 1")]
    RelaxedSpec { a: f64, b: f64 },

    /// A monotonicity-based certificate was asked for a non-monotone H.
    #[error("corollary inapplicable: {0}")]
    CorollaryInapplicable(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    /// Quadrature did not meet its tolerance within the level budget.
    #[error("quadrature did not converge (estimated relative error {est_rel_err:e})")]
    NoConvergence { est_rel_err: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// Errors caused by the caller's input shape rather than by the math.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidSpec(_) | Error::RelaxedSpec { .. } | Error::Dimension { .. } | Error::Config(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(what: &'static str, value: f64, domain: &'static str) -> Error {
    Error::Domain { what, value, domain }
}
