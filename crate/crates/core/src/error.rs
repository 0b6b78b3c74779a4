use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid inertia: principal moments must be finite and positive, got {0:?}")]
    InvalidInertia([f64; 3]),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("feedback law is singular at z = 0 (terminal guard disabled)")]
    SingularState,

    #[error("integration diverged at t = {time}")]
    Divergence { time: f64 },

    #[error("weight matrix is not symmetric positive definite")]
    InvalidWeight,

    #[error("covariance is not symmetric positive definite")]
    InvalidCovariance,

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("marginal mismatch: source mass {source_mass} vs target mass {target_mass}")]
    MarginalMismatch { source_mass: f64, target_mass: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error(
        "entropic kernel underflowed at epsilon = {epsilon}; retry with the log-domain solver"
    )]
    EpsilonTooSmall { epsilon: f64 },

    #[error("steering pair ({source_index}, {target_index}) failed: {reason}")]
    PairFailed {
        source_index: usize,
        target_index: usize,
        reason: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
