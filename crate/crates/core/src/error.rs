use std::io;

use thiserror::Error;

/// Errors produced by the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Gevrey order {0}: must exceed 1")]
    InvalidOrder(f64),
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("invalid weight sequence: {0}")]
    InvalidSequence(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("synthesis error: {0}")]
    Synthesis(String),
    #[error("oracle unavailable: {0}")]
    OracleUnavailable(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("boundary error: {0}")]
    Boundary(String),
    #[error("schedule error: {0}")]
    Schedule(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("field is not compactly supported: {0}")]
    NotCompactlySupported(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("size mismatch: expected {expected} bytes of payload, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("non-finite value at sample {0}")]
    NonFinite(usize),
    #[error("cannot parse {what} from {input:?}: {reason}")]
    Parse {
        what: &'static str,
        input: String,
        reason: String,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(what: &'static str, input: &str, reason: impl Into<String>) -> Self {
        Error::Parse {
            what,
            input: input.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
