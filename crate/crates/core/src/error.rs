use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A value outside the accepted domain of an operation.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// Input shorter than an operation requires.
    #[error("input too short: {0}")]
    Length(String),
    /// Incompatible configuration (STFT geometry, missing backend).
    #[error("configuration error: {0}")]
    Config(String),
    /// Tensor or matrix shapes that do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// Dataset-level inconsistency.
    #[error("dataset error: {0}")]
    Dataset(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($variant:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$variant(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
