use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("malformed coefficients: {0}")]
    Shape(String),

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("symplectic structure requires an even dimension, got {0}")]
    OddDimension(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite weights while integrating the weight flow at t = {time}")]
    FlowDivergence { time: f64 },

    #[error("non-finite state at step {step}")]
    StateDivergence { step: usize },

    #[error("non-finite loss at epoch {epoch}")]
    TrainingDivergence { epoch: usize },

    #[error("observation series is empty")]
    EmptyObservations,

    #[error("invalid observation: {0}")]
    InvalidObservation(String),

    #[error("index {index} out of range (length {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
