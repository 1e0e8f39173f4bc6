//! Crate-wide error type.

use std::path::PathBuf;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{op}: dimension mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("{op}: invalid shape {shape:?}: {reason}")]
    InvalidShape {
        op: &'static str,
        shape: Vec<usize>,
        reason: String,
    },

    #[error("conv1d: input shorter than kernel (length {len}, kernel width {width})")]
    InputShorterThanKernel { len: usize, width: usize },

    #[error("{op}: window of width {width} does not fit input of length {len}")]
    WindowTooWide {
        op: &'static str,
        len: usize,
        width: usize,
    },

    #[error("{op}: empty input")]
    EmptyInput { op: &'static str },

    #[error("backward: loss must be a scalar, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },

    #[error("{op}: non-finite value encountered: {value}")]
    NonFinite { op: &'static str, value: f64 },

    #[error("file not found: {path}")]
    MissingFile { path: PathBuf },

    #[error("{path}: row {row} has {got} columns, expected {expected}")]
    RaggedRow {
        path: PathBuf,
        row: usize,
        got: usize,
        expected: usize,
    },

    #[error("{path}: declares {got} feature columns, source '{name}' expects {expected}")]
    WrongDimension {
        path: PathBuf,
        name: String,
        got: usize,
        expected: usize,
    },

    #[error("{path}: row {row}, column {col}: cannot parse '{cell}' as a finite number")]
    BadCell {
        path: PathBuf,
        row: usize,
        col: usize,
        cell: String,
    },

    #[error("missing source '{name}' for ids: {}", ids.join(", "))]
    MissingDomain { name: String, ids: Vec<String> },

    #[error("invalid split fractions {fractions:?}: {reason}")]
    BadFractions { fractions: [f64; 3], reason: String },

    #[error("dataset too small to split: {m} records (need at least 3)")]
    DatasetTooSmall { m: usize },

    #[error("record '{id}' is missing source '{name}'")]
    MissingSource { id: String, name: String },

    #[error("record '{id}' has no label")]
    MissingLabel { id: String },

    #[error(
        "source '{name}' raw length {len} is below the minimum {min} admitted by the conv/pool stack"
    )]
    RawTooShort {
        name: String,
        len: usize,
        min: usize,
    },

    #[error("threshold {0} outside (0, 1)")]
    BadThreshold(f64),

    #[error("{metric}: undefined for this batch: {reason}")]
    MetricUndefined { metric: &'static str, reason: String },

    #[error("non-finite loss at stage {stage}, epoch {epoch}, batch {batch}: {loss}")]
    NonFiniteLoss {
        stage: u8,
        epoch: usize,
        batch: usize,
        loss: f64,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error("config hash mismatch: checkpoint was written with {expected:016x}, current config hashes to {got:016x}")]
    ConfigHashMismatch { expected: u64, got: u64 },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
