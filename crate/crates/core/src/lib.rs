//! Heterogeneous-domain embedding and multi-label prediction.
//!
//! The crate trains a two-stage model over samples that carry several
//! feature sources of different dimensionality (expression profiles,
//! fingerprints, physicochemical descriptors, ...):
//!
//! 1. a shared 1-D CNN embedder maps each raw source vector to a
//!    fixed-length embedding, pretrained so a softmax classifier can
//!    tell the sources apart (source-specific representations),
//! 2. a Bi-LSTM reads the per-source embeddings as a short sequence and
//!    feeds per-label binary heads trained with a numerically stable
//!    sigmoid cross-entropy.
//!
//! Everything runs on a small reverse-mode autodiff tape over dense
//! `f64` tensors; training is deterministic under a single seed.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod embedder;
pub mod error;
pub mod extractor;
pub mod gradsuite;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod predictor;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
