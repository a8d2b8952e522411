use std::path::PathBuf;

use thiserror::Error;

use crate::data::Modality;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// A record in an input file violates the lexical-system contract.
    #[error("{}:{line}: word '{word}': {message}", path.display())]
    Record {
        path: PathBuf,
        line: usize,
        word: String,
        message: String,
    },

    #[error("word '{word}': requested {requested} {modality} exemplars but only {available} available")]
    InsufficientExemplars {
        word: String,
        modality: Modality,
        requested: usize,
        available: usize,
    },

    #[error("word '{word}': {modality} prototype has zero norm")]
    ZeroNorm { word: String, modality: Modality },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the environment (missing files, unreadable
    /// directories) rather than of the data or the analysis.
    pub fn is_environmental(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Csv { source, .. } => source.is_io_error(),
            Error::Json { source, .. } => source.is_io(),
            _ => false,
        }
    }
}
