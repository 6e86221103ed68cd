//! Error type shared across the crate.

use std::fmt;

/// Everything that can go wrong while building, loading, or running a model.
#[derive(Debug)]
pub enum Error {
    /// A dimension did not match what the surrounding structure requires.
    DimMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    /// A sparse kernel violated a structural invariant (sort order, index
    /// range, duplicate position, or explicit zero value).
    CorruptKernel(String),
    /// An index bit width is too small for the coordinate range it must cover.
    IndexWidth {
        what: &'static str,
        needed: u32,
        given: u32,
    },
    /// A neuron or compression parameter is outside its valid range.
    BadParam(String),
    /// A decimal literal could not be parsed.
    BadDecimal(String),
    /// The layer chain does not type-check (shapes do not connect).
    ChainMismatch { layer: usize, detail: String },
    /// An engine needed another input row but the stream ended.
    StreamUnderrun { layer: usize },
    /// An engine tried to emit output channels out of order.
    EmissionOrder {
        layer: usize,
        expected: usize,
        actual: usize,
    },
    /// The pipelined runner stopped making progress.
    PipelineStalled { layer: usize, detail: String },
    /// A model or trace file declared an unsupported format version.
    VersionMismatch { found: u32, supported: u32 },
    /// A model file parsed as JSON but failed semantic validation.
    ModelFile(String),
    /// A spike trace file is malformed.
    TraceFile(String),
    /// JSON syntax or schema error, with the 1-based source location.
    Json {
        line: usize,
        column: usize,
        detail: String,
    },
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimMismatch {
                what,
                expected,
                actual,
            } => write!(f, "{what}: expected {expected}, got {actual}"),
            Error::CorruptKernel(msg) => write!(f, "corrupt sparse kernel: {msg}"),
            Error::IndexWidth {
                what,
                needed,
                given,
            } => write!(
                f,
                "{what} needs at least {needed} bits, only {given} given"
            ),
            Error::BadParam(msg) => write!(f, "invalid parameter: {msg}"),
            Error::BadDecimal(s) => write!(f, "invalid decimal literal {s:?}"),
            Error::ChainMismatch { layer, detail } => {
                write!(f, "layer {layer} does not fit the chain: {detail}")
            }
            Error::StreamUnderrun { layer } => {
                write!(f, "layer {layer}: input stream ended mid-timestep")
            }
            Error::EmissionOrder {
                layer,
                expected,
                actual,
            } => write!(
                f,
                "layer {layer}: emitted output channel {actual}, expected {expected}"
            ),
            Error::PipelineStalled { layer, detail } => {
                write!(f, "pipeline stalled at layer {layer}: {detail}")
            }
            Error::VersionMismatch { found, supported } => {
                write!(f, "format version {found} not supported (expected {supported})")
            }
            Error::ModelFile(msg) => write!(f, "model file: {msg}"),
            Error::TraceFile(msg) => write!(f, "trace file: {msg}"),
            Error::Json {
                line,
                column,
                detail,
            } => write!(f, "json error at line {line}, column {column}: {detail}"),
            Error::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json {
            line: e.line(),
            column: e.column(),
            detail: e.to_string(),
        }
    }
}
