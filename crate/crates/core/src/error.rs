use thiserror::Error;

/// Errors raised by tensor operations and the layers built on them.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("{op}: expected a rank-{expected} tensor, got shape {shape:?}")]
    Rank {
        op: &'static str,
        expected: usize,
        shape: Vec<usize>,
    },

    #[error("shape {shape:?} describes {expected} values but {found} were supplied")]
    DataLength {
        shape: Vec<usize>,
        expected: usize,
        found: usize,
    },

    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },

    #[error("{tokens} tokens do not fit a {height}x{width} grid")]
    GridMismatch {
        tokens: usize,
        height: usize,
        width: usize,
    },

    #[error("convolution kernel size {0} must be odd")]
    EvenKernel(usize),

    #[error("{op}: channel width {width} must be even to split into two subspaces")]
    OddWidth { op: &'static str, width: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown {what} `{name}`")]
    UnknownKind { what: &'static str, name: String },
}

pub type Result<T> = std::result::Result<T, Error>;
