use thiserror::Error;

/// Errors surfaced by every layer of the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed instance: {0}")]
    MalformedInstance(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("internal invariant violated: {0}")]
    InternalInvariant(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("instance too large: {combinations} combinations exceed the cap of {cap}")]
    InstanceTooLarge { combinations: f64, cap: u64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{context}: {source}")]
    Job {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
