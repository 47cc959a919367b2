use std::path::PathBuf;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus is empty: {0}")]
    EmptyCorpus(PathBuf),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("vocabulary too small: no substitute token available")]
    VocabularyTooSmall,
    #[error("sentence too short to shuffle (need at least 2 tokens)")]
    TooShort,
    #[error("empty input")]
    EmptyInput,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("empty dataset: {0}")]
    EmptyDataset(PathBuf),
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("unknown word: {0}")]
    UnknownWord(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("checkpoint format error: {0}")]
    Format(String),
    #[error("unsupported checkpoint version: {0}")]
    Version(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 for usage errors, 2 for data errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            _ => 2,
        }
    }
}
