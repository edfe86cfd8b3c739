use alloc::string::String;
use core::fmt;

/// Errors raised by configuration checks and domain-restricted formulas.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A configuration value violates a documented invariant.
    Config(String),
    /// A formula was evaluated outside its domain.
    Domain(String),
    /// A referenced beam, station or level does not exist.
    NotFound(String),
    /// Input data cannot support the requested computation.
    Insufficient(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::NotFound(msg) => write!(f, "not found: {msg}"),
            Error::Insufficient(msg) => write!(f, "insufficient data: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! config_err {
    ($($arg:tt)*) => { $crate::error::Error::Config(alloc::format!($($arg)*)) };
}
pub(crate) use config_err;
