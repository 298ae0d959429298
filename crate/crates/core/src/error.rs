use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent or unsupported model/network configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A parameter lies outside the interval where the construction is defined.
    #[error("{name} = {value} is outside the valid interval [{lo}, {hi}]")]
    Domain {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("state space too large: {0}")]
    Capacity(String),

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    /// Generator bookkeeping went wrong; indicates a bug rather than bad input.
    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("failed to parse {path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
