use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix is singular to working precision")]
    Singular,

    #[error("self-consistent field solve did not converge at step {step} (residual {residual:e})")]
    ScfNotConverged { step: usize, residual: f64 },

    #[error("non-finite state encountered at step {step}")]
    NonFinite { step: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unknown model tag `{0}`")]
    UnknownModel(String),

    #[error("output grids do not match: {0}")]
    GridMismatch(String),

    #[error("need at least {needed} usable points, found {found}")]
    TooFewPoints { needed: usize, found: usize },

    #[error("quadrature did not converge on [{a}, {b}]")]
    Quadrature { a: f64, b: f64 },

    #[error("malformed CSV: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
