use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// `|alpha * x|` exceeded the exponent guard.
    #[error("exponent overflow: |alpha * x| = {magnitude} exceeds {limit}")]
    ExponentOverflow { magnitude: f64, limit: f64 },

    #[error("non-finite input: {0}")]
    NonFiniteInput(&'static str),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("unknown target function `{0}`")]
    UnknownTarget(String),

    #[error("direction is not a descent direction (slope {slope})")]
    NotDescentDirection { slope: f64 },

    #[error("line search failed after {halvings} halvings")]
    LineSearchFailed { halvings: usize },

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid axis: {0}")]
    InvalidAxis(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
