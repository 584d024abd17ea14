use std::path::PathBuf;

/// Errors produced by ingestion, scoring and meta-evaluation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{context}: {message}")]
    Structure { context: String, message: String },

    #[error("{0}")]
    Domain(String),

    #[error("duplicate entry {key} in {path}:{line}")]
    Duplicate {
        path: PathBuf,
        line: usize,
        key: String,
    },

    #[error("seg_id mismatch for systems: {}", systems.join(", "))]
    Alignment { systems: Vec<String> },

    #[error("no human score for {lang_pair} system(s): {}", systems.join(", "))]
    MissingJudgment {
        lang_pair: String,
        systems: Vec<String>,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("segment {seg_id}: samples disagree on tokenization")]
    TokenizationMismatch { seg_id: usize },

    #[error("character {ch:?} is not covered by the subword vocabulary")]
    Coverage { ch: char },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate inputs: {0}")]
    Degenerate(String),

    #[error("missing data: {0}")]
    MissingData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
