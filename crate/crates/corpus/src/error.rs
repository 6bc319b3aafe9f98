use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid IOB tag '{0}'")]
    InvalidTag(String),
    #[error("tag '{0}' is not in the tag vocabulary")]
    UnknownTag(String),
    #[error("overlapping spans: ({0}, {1}) and ({2}, {3})")]
    OverlappingSpans(usize, usize, usize, usize),
    #[error("span ({start}, {end}) outside sentence of length {len}")]
    SpanOutOfRange { start: usize, end: usize, len: usize },
    #[error("no labeled sentences: cannot enumerate tags")]
    EmptyLabeled,
    #[error("embedding file holds {found}-dimensional vectors, config wants {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
