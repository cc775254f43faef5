use thiserror::Error;

pub type Result<T, E = TensorError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("{op}: shape mismatch, expected {expected}, found {found}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },

    #[error("invalid shape {shape:?}: {reason}")]
    InvalidShape { shape: Vec<usize>, reason: String },

    #[error("data length {len} does not match shape {shape:?}")]
    DataLength { shape: Vec<usize>, len: usize },

    #[error("{op}: extent {extent} on axis {axis} is not divisible by {divisor}")]
    Indivisible {
        op: &'static str,
        axis: usize,
        extent: usize,
        divisor: usize,
    },

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),

    #[error("batch statistics need more than one element per channel")]
    SingleElementStatistics,

    #[error("parameter {0} has no gradient")]
    MissingGrad(usize),

    #[error("invalid optimizer setting: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    Empty(&'static str),
}
