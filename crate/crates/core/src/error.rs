use std::fmt;
use std::path::PathBuf;

/// Errors produced by any public operation in this crate.
#[derive(Debug)]
pub enum Error {
    /// Two tensors (or a tensor and an expected layout) disagree on shape.
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    /// A shape is invalid on its own (zero extent, wrong rank, odd pool extent, ...).
    InvalidShape { op: &'static str, detail: String },
    /// An operation produced a NaN or infinite scalar.
    NonFinite { op: String },
    /// A configuration value is out of its allowed range.
    InvalidConfig(String),
    /// Training aborted because the loss became non-finite.
    NonFiniteLoss { epoch: usize, step: usize },
    /// A class label lies outside the head's range.
    LabelOutOfRange { label: usize, max: usize, context: String },
    /// Malformed row in a CSV input.
    Csv { path: PathBuf, row: usize, detail: String },
    /// Malformed or unsupported PGM/PPM data.
    Pnm { path: PathBuf, detail: String },
    /// Model file rejected (bad magic, version, or payload length).
    ModelFormat(String),
    /// A layer name does not exist in the model.
    UnknownLayer(String),
    /// A filter index is out of range for the named layer.
    FilterOutOfRange { layer: String, filter: usize, count: usize },
    /// An I/O failure, with the path that caused it.
    Io { path: PathBuf, source: std::io::Error },
    /// Anything else with a one-line explanation.
    Invalid(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { op, lhs, rhs } => {
                write!(f, "{op}: shape mismatch between {lhs:?} and {rhs:?}")
            }
            Error::InvalidShape { op, detail } => write!(f, "{op}: invalid shape: {detail}"),
            Error::NonFinite { op } => write!(f, "{op}: produced a non-finite value"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::NonFiniteLoss { epoch, step } => {
                write!(f, "training aborted: non-finite loss at epoch {epoch}, step {step}")
            }
            Error::LabelOutOfRange { label, max, context } => {
                write!(f, "{context}: label {label} outside 0..={max}")
            }
            Error::Csv { path, row, detail } => {
                write!(f, "{}: row {row}: {detail}", path.display())
            }
            Error::Pnm { path, detail } => write!(f, "{}: {detail}", path.display()),
            Error::ModelFormat(msg) => write!(f, "model file rejected: {msg}"),
            Error::UnknownLayer(name) => write!(f, "unknown layer name: {name:?}"),
            Error::FilterOutOfRange { layer, filter, count } => {
                write!(f, "layer {layer:?} has {count} filters; filter {filter} out of range")
            }
            Error::Io { path, source } => write!(f, "{}: {source}", path.display()),
            Error::Invalid(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
