use thiserror::Error;

/// Errors raised by the precoding library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("quantized precoder is identically zero; step size is mis-scaled for the input")]
    DegenerateQuantization,

    #[error("no lattice point satisfies the power constraint")]
    Infeasible,

    #[error("instance too large for exhaustive search: {points:.3e} lattice points exceed the limit {limit:.0e}")]
    SizeGuard { points: f64, limit: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn shape(expected: impl Into<String>, got: impl Into<String>) -> Error {
    Error::Shape {
        expected: expected.into(),
        got: got.into(),
    }
}
