use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The quantity is infinite, or a Monte Carlo estimate of it would be
    /// statistically meaningless, so the computation is refused.
    #[error("refused: {0}")]
    Refused(String),
    /// An internal consistency check failed.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! domain {
    ($($arg:tt)*) => {
        $crate::Error::Domain(alloc::format!($($arg)*))
    };
}

macro_rules! refused {
    ($($arg:tt)*) => {
        $crate::Error::Refused(alloc::format!($($arg)*))
    };
}

pub(crate) use domain;
pub(crate) use refused;
