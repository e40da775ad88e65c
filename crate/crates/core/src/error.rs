use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inputs for which the quantity is not defined (e.g. a zero denominator).
    #[error("undefined input: {0}")]
    UndefinedInput(String),

    /// A parameter outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested optimum does not exist at a finite value.
    #[error("divergent result: {0}")]
    Divergence(String),

    /// Caller violated an operation's contract (lengths, parity of counts, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("parse error at line {line}: {message} (token {token:?})")]
    Parse {
        line: usize,
        token: String,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
