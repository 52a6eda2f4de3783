use thiserror::Error;

/// Error taxonomy shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad user-supplied configuration: unknown environment, invalid noise
    /// spec, malformed config document, out-of-range dimension index.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke an API precondition (mismatched lengths, stepping a
    /// finished episode, invalid action for the action space, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A training run went numerically bad (non-finite loss or gradients).
    #[error("training failure: {0}")]
    Training(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
