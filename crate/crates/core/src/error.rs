use thiserror::Error;

use crate::numerics::QuadratureResult;

/// Errors raised by the detection toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature ran out of budget before meeting its tolerance.
    #[error(
        "quadrature did not converge: estimate {} +/- {} after {} evaluations",
        .partial.value,
        .partial.error_estimate,
        .partial.evaluations
    )]
    Quadrature { partial: QuadratureResult },

    /// A root could not be bracketed or refined.
    #[error("root finding failed: {0}")]
    Bracket(String),

    /// A failure attached to a specific grid point of a curve computation.
    #[error("at p_fa = {pfa}: {source}")]
    GridPoint {
        pfa: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for numerical failures (as opposed to invalid arguments).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Domain(_) => false,
            Error::Quadrature { .. } | Error::Bracket(_) => true,
            Error::GridPoint { source, .. } => source.is_numerical(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
