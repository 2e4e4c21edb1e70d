use thiserror::Error;

/// Errors raised by the library. The variants map onto the CLI exit codes.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// Inconsistent or unsupported configuration (field parameters, tester specs, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed input file. `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// The adversary broke the online protocol (overspent or made an illegal move).
    #[error("protocol violation: {0}")]
    Protocol(String),

    /// A universally quantified inequality failed. Signals an implementation bug.
    #[error("lemma check failed: {0}")]
    LemmaViolation(String),

    /// Precondition of a derived construction was not met (e.g. an inconsistent clique).
    #[error("integrity error: {0}")]
    Integrity(String),

    /// The family cannot answer the request (not linear and not enumerable).
    #[error("unsupported family: {0}")]
    Unsupported(String),

    /// The request exceeds a computation budget (enumeration cap, table size, ...).
    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
