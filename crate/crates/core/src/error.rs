use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// Shapes, indices or registers do not fit together.
    #[error("structural error: {0}")]
    Structural(String),
    /// A parameter is outside its admissible range, or a matrix is not unitary.
    #[error("validation error: {0}")]
    Validation(String),
    /// A party touched a qubit or read a record it does not own.
    #[error("locality violation: {0}")]
    Locality(String),
    /// Register capacity or ebit supply exhausted.
    #[error("resource error: {0}")]
    Resource(String),
    /// A remote-operation primitive was used out of order.
    #[error("protocol error: {0}")]
    Protocol(String),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(format!($($arg)*)))
    };
}
pub(crate) use bail;
