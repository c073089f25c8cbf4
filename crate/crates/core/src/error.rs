use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// A configuration cannot be realised (e.g. too many paths for the grid).
    #[error("invalid configuration: {0}")]
    Config(String),
    /// A factorisation or solver failed, or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// A normalising reference (signal energy) is zero.
    #[error("undefined reference: {0}")]
    UndefinedReference(String),
    /// Training diverged.
    #[error("training diverged at epoch {epoch}: {reason}")]
    Training { epoch: usize, reason: String },
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
