use std::ops::Range;

use thiserror::Error;

/// Errors produced by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("degenerate alignment: {0}")]
    DegenerateAlignment(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("alignment has no words")]
    NoWords,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("no neighbouring unit on the {0} side of the span")]
    MissingNeighbor(&'static str),
    #[error("empty region {0:?}")]
    EmptyRegion(Range<usize>),
    #[error("zero vector passed to cosine similarity")]
    ZeroVector,
    #[error("contrastive batch needs at least 2 items, got {0}")]
    BatchTooSmall(usize),
    #[error("temperature must be positive, got {0}")]
    BadTemperature(f64),
    #[error("no context frames around region {0:?}")]
    EmptyContext(Range<usize>),
    #[error("edit plan does not match alignment: {0}")]
    PlanMismatch(String),
    #[error("unsupported audio: {0}")]
    Audio(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad input rather than an environment failure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
