//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the engine, attacks, sampler, data and eval layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor construction or elementwise op with inconsistent shapes.
    #[error("shape mismatch: expected {expected:?}, got {got:?} ({context})")]
    ShapeMismatch {
        expected: Vec<usize>,
        got: Vec<usize>,
        context: String,
    },

    /// Batch width does not match a layer's input width.
    #[error("layer {layer}: input width {got} does not match expected {expected}")]
    LayerDimension {
        layer: usize,
        expected: usize,
        got: usize,
    },

    /// A target row is not a probability distribution.
    #[error("target row {row} is not a distribution: {reason}")]
    InvalidTarget { row: usize, reason: String },

    /// Non-finite value encountered where finiteness is required.
    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    /// Invalid configuration value.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Scale factor outside the admissible range [0, S].
    #[error("scale {scale} outside [0, {max_scale}]")]
    ScaleOutOfRange { scale: f64, max_scale: f64 },

    /// Label smoothing factor outside [0, 1].
    #[error("beta {0} outside [0, 1]")]
    BetaOutOfRange(f64),

    /// IDX file has an unexpected magic number.
    #[error("{path}: bad IDX magic: expected {expected:#010x}, found {found:#010x}")]
    IdxBadMagic {
        path: String,
        expected: u32,
        found: u32,
    },

    /// IDX file is shorter than its header promises.
    #[error("{path}: truncated IDX file: need {needed} bytes, have {have}")]
    IdxTruncated {
        path: String,
        needed: usize,
        have: usize,
    },

    /// Image and label files disagree on the number of records.
    #[error("IDX count mismatch: {images} images vs {labels} labels")]
    IdxCountMismatch { images: usize, labels: usize },

    /// Checkpoint file is malformed or has the wrong magic.
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),

    /// Dataset contains no samples.
    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
