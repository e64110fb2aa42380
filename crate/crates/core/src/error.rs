use thiserror::Error;

/// Errors raised by the diagnosis library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{0} is not positive definite")]
    NotPositiveDefinite(&'static str),

    #[error("{0} is not positive semi-definite (min eigenvalue {1:e})")]
    NotPositiveSemiDefinite(&'static str, f64),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("pair (A, B) is not controllable")]
    Uncontrollable,

    #[error("DC gain matrix is singular")]
    SingularDcGain,

    #[error("measurement has zero likelihood under every candidate model")]
    ImpossibleMeasurement,

    #[error("quadratic form has no curvature; concavity boundary is undefined")]
    NoCurvature,

    #[error("vertex count {count} exceeds cap {cap}")]
    VertexCapExceeded { count: usize, cap: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dims(msg: impl Into<String>) -> Error {
    Error::DimensionMismatch(msg.into())
}
