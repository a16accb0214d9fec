use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside the documented domain of a function.
    #[error("{func}: argument outside domain ({detail})")]
    Domain { func: &'static str, detail: String },

    /// A Monte Carlo draw produced a non-finite label or gradient.
    #[error("rejected draw: non-finite label or gradient")]
    RejectedDraw,

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("dataset too small: need at least {needed} samples, got {got}")]
    DatasetTooSmall { needed: usize, got: usize },

    /// Adam received a NaN or infinite gradient entry.
    #[error("non-finite gradient at step {step} (layer {layer}, entry {index})")]
    NonFiniteGradient {
        step: u64,
        layer: usize,
        index: usize,
    },

    #[error("quadrature did not converge: error estimate {achieved:e} above tolerance {tolerance:e}")]
    OracleNonConvergence { achieved: f64, tolerance: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed input at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(func: &'static str, detail: impl Into<String>) -> Error {
    Error::Domain {
        func,
        detail: detail.into(),
    }
}
