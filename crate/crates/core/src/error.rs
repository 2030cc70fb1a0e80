use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quantity is infinite for this measure: {0}")]
    Divergent(String),

    #[error("non-finite integrand value at x = {x}")]
    NonFiniteIntegrand { x: f64 },

    #[error("quadrature tolerance not met: estimate {estimate:e}, error {error:e} after {subdivisions} subdivisions")]
    ToleranceNotMet { estimate: f64, error: f64, subdivisions: usize },

    #[error("root finding failed: {0}")]
    RootNotFound(String),

    #[error("grid cannot hold the profile: tail mass {tail_mass:e} beyond half-width {half_width}")]
    TruncationViolated { tail_mass: f64, half_width: f64 },

    #[error("grid size {0} is not a power of two in [2^8, 2^22]")]
    BadGridSize(usize),

    #[error("profile not normalized: squared L2 norm {0}")]
    NotNormalized(f64),

    #[error("minimizer not bracketed: {0}")]
    NoBracket(String),

    #[error("least squares problem is rank deficient (singular values {0:?})")]
    RankDeficient(Vec<f64>),

    #[error("{0}")]
    Fit(String),

    #[error("serialization: {0}")]
    Serde(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
