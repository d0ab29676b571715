use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("series is empty (dims={dims}, len={len})")]
    EmptySeries { dims: usize, len: usize },
    #[error("non-finite sample at dim {dim}, t={index}")]
    NonFiniteSample { dim: usize, index: usize },
    #[error("label length {labels} does not match series length {len}")]
    LabelLengthMismatch { labels: usize, len: usize },
    #[error("ragged series: dim {dim} has length {got}, expected {expected}")]
    RaggedSeries { dim: usize, got: usize, expected: usize },
    #[error("series of length {len} too short, need at least {min}")]
    SeriesTooShort { len: usize, min: usize },
    #[error("smoothing multiplier must be nonnegative, got {0}")]
    NegativeLambda(f64),
    #[error("cannot transform an empty window")]
    EmptyWindow,
    #[error("spectrum violates conjugate symmetry at bin {bin} (deviation {deviation:e})")]
    AsymmetricSpectrum { bin: usize, deviation: f64 },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("span [{start}, {start}+{len}) out of range for length {bound}")]
    SpanOutOfRange { start: usize, len: usize, bound: usize },
    #[error("span lengths differ: {a} vs {b}")]
    SpanLengthMismatch { a: usize, b: usize },
    #[error("dimension mismatch: {a} vs {b}")]
    DimensionMismatch { a: usize, b: usize },
    #[error("span of length {len} too short, need at least {min}")]
    SpanTooShort { len: usize, min: usize },
    #[error("anomaly augmentation requested but no injection methods enabled")]
    NoMethodsEnabled,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("input has {got} channels, encoder expects {expected}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("no forward pass recorded for the requested node")]
    NoForwardRecorded,
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("series of length {len} shorter than window of length {window}")]
    SeriesShorterThanWindow { len: usize, window: usize },
    #[error("length mismatch: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("validation set has no labeled anomalies")]
    NoLabeledValidation,
    #[error("frequency {0} outside (0, 0.5]")]
    InvalidOmega(f64),
    #[error("need at least {min} series, got {got}")]
    TooFewSeries { got: usize, min: usize },
    #[error("unknown anomaly kind `{0}`")]
    UnknownKind(String),
    #[error("parse error at record {record}: {message}")]
    Parse { record: usize, message: String },
    #[error("timestamps not strictly increasing at record {record}")]
    NonMonotonicTimestamps { record: usize },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Coarse category used for command-line diagnostics.
    pub fn category(&self) -> &'static str {
        match self {
            Error::EmptySeries { .. }
            | Error::NonFiniteSample { .. }
            | Error::LabelLengthMismatch { .. }
            | Error::RaggedSeries { .. }
            | Error::Parse { .. }
            | Error::NonMonotonicTimestamps { .. } => "input",
            Error::Io(_) => "io",
            Error::Checkpoint(_) => "checkpoint",
            Error::InvalidConfig(_)
            | Error::NoMethodsEnabled
            | Error::InvalidOmega(_)
            | Error::UnknownKind(_)
            | Error::NegativeLambda(_)
            | Error::TooFewSeries { .. } => "config",
            Error::EmptyTrainingSet
            | Error::NoLabeledValidation
            | Error::SeriesShorterThanWindow { .. }
            | Error::LengthMismatch { .. }
            | Error::DimensionMismatch { .. }
            | Error::ChannelMismatch { .. } => "data",
            _ => "numeric",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
