use thiserror::Error;

/// Errors raised by kernel evaluation, walk dynamic programming, the
/// determinant engine and the oracles.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A series, quadrature or truncation did not reach its tolerance.
    #[error("numeric error in {context}: {detail}")]
    Numeric { context: &'static str, detail: String },

    /// A contour integral of a real quantity kept a large imaginary part.
    #[error("imaginary residual {residual:e} exceeds {threshold:e}")]
    ImaginaryResidual { residual: f64, threshold: f64 },

    /// The linear system behind a resolvent is singular.
    #[error("singular factorization: {0}")]
    Singular(String),

    /// A state-space oracle would exceed its state budget.
    #[error("state budget exceeded: {states} states > {budget}")]
    StateBudget { states: usize, budget: usize },

    /// The window-doubling loop stopped at its maximum depth.
    #[error("determinant not converged at depth {depth} (last increment {increment:e})")]
    NotConverged { depth: usize, increment: f64 },

    /// Malformed run configuration.
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(context: &'static str, detail: impl Into<String>) -> Self {
        Error::Numeric {
            context,
            detail: detail.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
