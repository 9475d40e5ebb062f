use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation (non-positive scale, bad stable index, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The call is structurally wrong: mismatched dimensions, double perturbation, invalid chain state.
    #[error("usage error: {0}")]
    Usage(String),

    /// The model does not expose a capability the algorithm needs.
    #[error("capability error: {0}")]
    Capability(String),

    /// A sampler could not build a valid starting state within its retry budget.
    #[error("initialization failed: {0}")]
    Initialization(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("data error at line {line}: {message}")]
    Data { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn capability(msg: impl Into<String>) -> Self {
        Error::Capability(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
