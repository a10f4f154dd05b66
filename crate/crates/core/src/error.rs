use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid montage: {0}")]
    Montage(String),

    #[error("channel index {index} out of range for {len} channels")]
    ChannelOutOfRange { index: usize, len: usize },

    #[error("invalid trial data: {0}")]
    Trials(String),

    #[error("filter design failed: {0}")]
    FilterDesign(String),

    #[error("signal of {len} samples is shorter than one segment of {segment} samples")]
    TooShort { len: usize, segment: usize },

    #[error("baseline band power {power:e} is below the degeneracy floor")]
    DegenerateBaseline { power: f64 },

    #[error("empty channel mask")]
    EmptyMask,

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("feature error: {0}")]
    Features(String),

    #[error("classifier error: {0}")]
    Classifier(String),

    #[error("statistics error: {0}")]
    Stats(String),

    #[error("trial file {path}: {msg}")]
    TrialFile { path: PathBuf, msg: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Context { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }

    /// Wrap the error with a human-readable stage or subject label.
    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
