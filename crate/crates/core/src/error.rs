use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: String, message: String },

    #[error("element index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("points are coincident")]
    CoincidentPoints,

    #[error("window {start}..={end} is outside the array of {len} elements")]
    WindowOutOfBounds { start: usize, end: usize, len: usize },

    #[error("correlation matrix distance undefined for a zero matrix")]
    ZeroMatrix,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no delay bin above threshold (all-noise profile)")]
    AllNoise,

    #[error("LOS tap of element {element} carries no energy above noise")]
    NoLosEnergy { element: usize },

    #[error("{0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}
