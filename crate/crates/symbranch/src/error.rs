//! Crate-wide error type.

/// Errors produced by the numerical and simulation layers.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("negative rate {rate} at offset {offset:?}")]
    NegativeRate { offset: Vec<i64>, rate: f64 },

    #[error("kernel has no positive rate")]
    EmptySupport,

    #[error("kernel rates cannot be normalized: {0}")]
    NonNormalizable(String),

    #[error("quadrature did not converge: achieved {achieved:.3e}, required {required:.3e}")]
    QuadratureNotConverged { achieved: f64, required: f64 },

    #[error("step h={step} too large for kappa={kappa}: implicit diagonal term degenerates")]
    StepTooLarge { kappa: f64, step: f64 },

    #[error("invalid generator: {0}")]
    InvalidGenerator(String),

    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),

    #[error("kernel must be symmetric for two-time correlations")]
    AsymmetricKernel,

    #[error("simulation unstable at t={time}: |value|={value:.3e} exceeds limit")]
    UnstableStep { time: f64, value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
