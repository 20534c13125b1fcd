use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("order {order} needs time derivatives of f at t=0 up to l={needed}, only {supplied} supplied")]
    MissingDerivatives {
        order: usize,
        needed: usize,
        supplied: usize,
    },

    #[error("spectral decomposition failed: {0}")]
    Spectral(String),

    #[error("solution blew up at step {step}: max norm {norm:e}")]
    BlowUp { step: usize, norm: f64 },

    #[error("non-finite value at step {step}")]
    NonFinite { step: usize },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Spectral(_) | Error::BlowUp { .. } | Error::NonFinite { .. } | Error::Quadrature(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
