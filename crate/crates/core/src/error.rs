use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("missing field `{name}` at line {line}")]
    MissingField { line: usize, name: String },

    #[error("duplicate record id {0}")]
    DuplicateId(u64),

    #[error("bad magic bytes: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),

    #[error("dimension mismatch: found {found}, expected {expected}")]
    DimMismatch { found: usize, expected: usize },

    #[error("file truncated")]
    TruncatedFile,

    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),

    #[error("vector for id {0} has non-finite components")]
    NonFiniteVector(u64),

    #[error("vector for id {0} has zero norm")]
    ZeroVector(u64),

    #[error("span {span} does not match caption of record {id}")]
    SpanMismatch { id: u64, span: String },

    #[error("annotation references unknown record {0}")]
    UnknownRecord(u64),

    #[error("id {0} not present in index or store")]
    UnknownId(u64),

    #[error("no admissible candidate for query {0}")]
    NoCandidate(u64),

    #[error("record {0} has no entity with an admissible replacement")]
    NoAdmissibleReplacement(u64),

    #[error("records {source_id} and {donor_id} share no swappable entity")]
    InadmissiblePair { source_id: u64, donor_id: u64 },

    #[error("replacement spans overlap or are unsorted")]
    OverlappingSpans,

    #[error("replacement span {start}..{end} outside caption of {len} characters")]
    SpanOutOfBounds { start: usize, end: usize, len: usize },

    #[error("strategy {kind} requires {input}")]
    MissingInput { kind: String, input: String },

    #[error("class {0} is empty")]
    EmptyClass(String),

    #[error("unexpected label {label} in {context} input")]
    LabelMismatch { label: String, context: String },

    #[error("unsupported format `{0}`")]
    UnsupportedFormat(String),

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("missing predictions for {} benchmark ids (first: {:?})", .0.len(), .0.first())]
    MissingPrediction(Vec<u64>),

    #[error("duplicate prediction for id {0}")]
    DuplicatePrediction(u64),

    #[error("prediction for id {0} not in benchmark")]
    UnknownPrediction(u64),

    #[error("top-k cache was built for different inputs")]
    CacheMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
