use thiserror::Error;

/// Errors raised while building, parsing, splitting or normalizing series.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("malformed csv at line {line}: {message}")]
    MalformedCsv { line: usize, message: String },
    #[error("timestamps are not strictly increasing at line {line}")]
    NonMonotonicTimestamps { line: usize },
    #[error("missing value at line {line}, column '{column}'")]
    MissingValues { line: usize, column: String },
    #[error("series has no observations")]
    EmptySeries,
    #[error("series contains a non-finite value at row {row}, channel {channel}")]
    NonFinite { row: usize, channel: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("split ratios are invalid: {0}")]
    InvalidRatios(String),
    #[error("split of {n} points leaves the {segment} segment empty")]
    DegenerateSplit { n: usize, segment: &'static str },
    #[error("channel {channel} has zero variance")]
    ZeroVariance { channel: usize },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}
