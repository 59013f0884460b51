use thiserror::Error;

/// Errors raised anywhere in the synthesis, extraction and learning pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid distribution for {field}: {reason}")]
    InvalidDistribution { field: String, reason: String },

    #[error("pass window [{start}, {end}] s does not contain the pass [{entry}, {clear}] s")]
    WindowTooShort { start: f64, end: f64, entry: f64, clear: f64 },

    #[error("vehicle {vehicle_id} stops before clearing the array")]
    VehicleStalls { vehicle_id: u64 },

    #[error("trace for link {link_id} is unusable: {reason}")]
    UnusableTrace { link_id: u8, reason: String },

    #[error("incomplete pass: {0}")]
    IncompletePass(String),

    #[error("degenerate event: {0}")]
    DegenerateEvent(String),

    #[error("onset times are not strictly ordered: {0:?}")]
    UnorderedOnsets([f64; 3]),

    #[error("training set: {0}")]
    InvalidDataset(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite input value at index {0}")]
    NonFiniteInput(usize),

    #[error("stream order violated on link {link_id}: {time} s after {last} s")]
    StreamOrder { link_id: u8, time: f64, last: f64 },

    #[error("unknown link id {0}")]
    UnknownLink(u8),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
