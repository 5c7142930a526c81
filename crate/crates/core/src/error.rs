use thiserror::Error;

/// Library error type.
#[derive(Debug, Error)]
pub enum SimError {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A scenario configuration failed validation. The message names the
    /// offending key.
    #[error("config error ({key}): {message}")]
    Config { key: String, message: String },
    /// I/O failure while reading configs or writing reports.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    /// Malformed JSON config.
    #[error("config parse error: {0}")]
    ConfigParse(#[from] serde_json::Error),
}

impl SimError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        SimError::InvalidArgument(msg.into())
    }

    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        SimError::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
