use std::io;

use thiserror::Error;

/// Errors produced anywhere in the library.
///
/// The variants are grouped so that a front end can map them onto distinct
/// exit statuses: configuration problems, violated preconditions, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate design: condition estimate {condition:e} exceeds {limit:e}")]
    DegenerateDesign { condition: f64, limit: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid bounded-difference certificate: {0}")]
    InvalidCertificate(String),
    #[error("unsupported input: {0}")]
    Unsupported(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Coarse classification used by command-line front ends.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::InvalidInput(_)
            | Error::DegenerateDesign { .. }
            | Error::Precondition(_)
            | Error::InvalidCertificate(_)
            | Error::Unsupported(_) => ErrorKind::Validation,
            Error::Io(_) => ErrorKind::Io,
            Error::Csv(e) if e.is_io_error() => ErrorKind::Io,
            Error::Csv(_) => ErrorKind::Config,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Validation,
    Io,
}

pub type Result<T> = std::result::Result<T, Error>;
