//! Crate-wide error type.

use alloc::string::String;
use core::fmt;

/// Errors surfaced by numeric, mining, and discovery operations.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Tensor or layer shapes are incompatible for the requested operation.
    ShapeMismatch {
        op: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
    /// Backward was requested for something that is not a recorded scalar.
    NotAScalar { op: &'static str, got: (usize, usize) },
    /// A forward/backward pass or sampler produced NaN/Inf.
    NonFinite { context: &'static str },
    /// A continuous value fell outside every configured bin.
    Binning { feature: String, value: f64 },
    /// A rule token is absent from the vocabulary.
    UnknownToken { token: String },
    /// An input collection was empty where at least one element is required.
    EmptyInput { context: &'static str },
    /// A configuration value is out of its documented range.
    InvalidConfig { what: &'static str, detail: String },
    /// Training produced a non-finite loss.
    Diverged { epoch: usize },
    /// The training labels contain a single class; a probe cannot be fit.
    DegenerateProbe,
    /// PCA input has no variance to decompose.
    DegenerateInput { context: &'static str },
    /// The requested evaluation is undefined for this model (e.g. zero-shot on
    /// a model without rule encoders).
    Unsupported { what: &'static str },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { op, expected, got } => write!(
                f,
                "{op}: shape mismatch, expected {}x{}, got {}x{}",
                expected.0, expected.1, got.0, got.1
            ),
            Error::NotAScalar { op, got } => {
                write!(f, "{op}: expected a 1x1 scalar, got {}x{}", got.0, got.1)
            }
            Error::NonFinite { context } => write!(f, "non-finite value in {context}"),
            Error::Binning { feature, value } => {
                write!(f, "value {value} of feature '{feature}' falls outside every bin")
            }
            Error::UnknownToken { token } => write!(f, "token '{token}' not in vocabulary"),
            Error::EmptyInput { context } => write!(f, "empty input: {context}"),
            Error::InvalidConfig { what, detail } => write!(f, "invalid config {what}: {detail}"),
            Error::Diverged { epoch } => write!(f, "training diverged at epoch {epoch}"),
            Error::DegenerateProbe => write!(f, "probe training labels contain a single class"),
            Error::DegenerateInput { context } => write!(f, "degenerate input: {context}"),
            Error::Unsupported { what } => write!(f, "unsupported operation: {what}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
