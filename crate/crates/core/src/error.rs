use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("quadrature did not reach tolerance: {0}")]
    QuadratureFailure(String),

    #[error("transform diverges at x = {x}")]
    DivergentTransform { x: f64 },

    #[error("integral of the reciprocal diverges at the origin")]
    DivergentAtOrigin,

    #[error("non-positive denominator at z = {z}")]
    NonpositiveDenominator { z: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("bisection failed: {0}")]
    BisectionFailure(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("unstable step at t = {t}: increment {increment} exceeds guard {guard}")]
    UnstableStep { t: f64, increment: f64, guard: f64 },

    #[error("barrier evaluation failed at {at}: {reason}")]
    Evaluation { at: f64, reason: String },

    #[error("censored fraction {fraction:.4} exceeds limit {limit}")]
    ExcessCensoring { fraction: f64, limit: f64 },

    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { field: field.into(), reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
