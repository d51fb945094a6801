use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed delimited text. `line` is 1-based and counts the header.
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("no samples")]
    NoSamples,

    /// `index` is the 0-based sample index within the trace.
    #[error(
        "non-monotonic timestamp at sample index {index}: {timestamp} does not follow {previous}"
    )]
    NonMonotonic {
        index: usize,
        timestamp: i64,
        previous: i64,
    },

    #[error("invalid event label: {0}")]
    InvalidLabel(String),

    #[error("invalid session: {0}")]
    Session(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-normal data in training set: {0}")]
    ImpureTraining(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("degenerate ROC: {0}")]
    DegenerateRoc(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("artifact: {0}")]
    Artifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse error category, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Runtime,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Parse { .. }
            | Error::NoSamples
            | Error::NonMonotonic { .. }
            | Error::InvalidLabel(_)
            | Error::Session(_)
            | Error::ImpureTraining(_)
            | Error::Artifact(_)
            | Error::Checkpoint(_)
            | Error::DegenerateRoc(_) => ErrorKind::Data,
            Error::Shape(_) | Error::Numeric(_) | Error::Io(_) => ErrorKind::Runtime,
        }
    }

    pub(crate) fn parse(line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
