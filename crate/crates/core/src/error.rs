use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated data: expected {expected} samples, found {found}")]
    TruncatedData { expected: usize, found: usize },
    #[error("unsupported magic {0:?} (expected P2 or P5)")]
    UnsupportedMagic(String),
    #[error("ragged rows: line {line} has {found} fields, expected {expected}")]
    RaggedRows { line: usize, expected: usize, found: usize },
    #[error("value out of range: {0}")]
    ValueOutOfRange(String),
    #[error("empty input")]
    EmptyInput,
    #[error("degenerate histogram: image has a single intensity {0}")]
    DegenerateHistogram(u8),
    #[error("empty foreground: no pixel classified as foreground")]
    EmptyForeground,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("inconsistent counts: {0}")]
    InconsistentCounts(String),
    #[error("series too short: {0} slices, need at least 3")]
    SeriesTooShort(usize),
    #[error("phantom spec out of bounds: {0}")]
    SpecOutOfBounds(String),
    #[error("dataset too small: {0} items, need at least 20")]
    DatasetTooSmall(usize),
    #[error("training set holds a single class")]
    SingleClassTrainSet,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
