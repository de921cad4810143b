//! Crate-wide error type.

use alloc::string::String;

/// Errors raised by the numeric core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Descriptor or channel dimensionality disagrees with the experiment's C.
    DimMismatch { expected: usize, got: usize },
    /// Two containers that must pair up have different lengths.
    LengthMismatch { left: usize, right: usize },
    /// Tensor or image shapes disagree.
    ShapeMismatch(String),
    /// Keypoint outside the target grid.
    OutOfBounds { x: i64, y: i64, width: usize, height: usize },
    /// Batch smaller than the operation can mine negatives from.
    BatchTooSmall { got: usize, min: usize },
    /// Triplet batch contains repeated labels.
    DuplicateLabels,
    /// Dataset has no usable samples.
    EmptyDataset,
    /// A required input collection is empty.
    EmptyInput(&'static str),
    /// A loss or update produced a non-finite value.
    NonFinite(&'static str),
    /// Checkpoint carries an unsupported format version.
    CheckpointVersion { found: u32, supported: u32 },
    /// Checkpoint bytes are truncated or structurally invalid.
    CheckpointCorrupt(&'static str),
    /// Configuration text is missing a required key. `expected` lists every
    /// key the format defines.
    MissingKey { key: String, expected: String },
    /// Configuration value failed validation.
    InvalidValue { key: String, reason: String },
    /// Requested operation is not available on this provider or variant.
    Unsupported(&'static str),
    /// External descriptor lookup failed.
    MissingDescriptor { image: String, index: usize },
}

impl core::fmt::Display for Error {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Error::DimMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right}")
            }
            Error::ShapeMismatch(s) => write!(f, "shape mismatch: {s}"),
            Error::OutOfBounds { x, y, width, height } => {
                write!(f, "point ({x}, {y}) outside {width}x{height} grid")
            }
            Error::BatchTooSmall { got, min } => {
                write!(f, "batch of {got} too small, need at least {min}")
            }
            Error::DuplicateLabels => write!(f, "batch labels must be distinct"),
            Error::EmptyDataset => write!(f, "dataset is empty"),
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::CheckpointVersion { found, supported } => {
                write!(f, "checkpoint version {found} unsupported (supported: {supported})")
            }
            Error::CheckpointCorrupt(why) => write!(f, "corrupt checkpoint: {why}"),
            Error::MissingKey { key, expected } => {
                write!(f, "missing config key `{key}`; expected keys: {expected}")
            }
            Error::InvalidValue { key, reason } => {
                write!(f, "invalid config value for `{key}`: {reason}")
            }
            Error::Unsupported(what) => write!(f, "unsupported: {what}"),
            Error::MissingDescriptor { image, index } => {
                write!(f, "no stored descriptor for image `{image}` keypoint {index}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
