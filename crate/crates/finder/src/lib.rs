//! Formula-graph self-attention network for materials property prediction.
//!
//! A material is represented as a *formula graph*: every atom of either the
//! reduced integer formula (fully connected, directed, learned edge attributes)
//! or the crystal unit cell (cutoff-radius edges carrying Gaussian-expanded
//! distances) becomes a node. One attention-integrated message-passing
//! architecture consumes both, so the same model family covers
//! stoichiometry-only and structure-based prediction.
//!
//! The crate is organized as:
//!
//! - [`tensor`]: minimal reverse-mode differentiation engine (dense tensors,
//!   a recording tape, Adam with per-iteration learning-rate decay, global
//!   gradient-norm clipping, and a versioned binary checkpoint container);
//! - [`chem`]: chemical formula parsing, fractional-to-integer reduction,
//!   and element embedding tables;
//! - [`graph`]: formula-graph and crystal-graph construction, periodic
//!   neighbor lists, Gaussian distance expansion;
//! - [`model`]: the message-passing network itself: learned edge prediction,
//!   element-wise self-attention, attention pooling with residual probes, a
//!   convolutional post-processing stack, and the robust (Laplace) loss with
//!   aleatoric uncertainty;
//! - [`train`]: dataset splitting, z-score normalization, the training loop,
//!   evaluation metrics and the two-sample t-test;
//! - [`spectra`]: fixed-grid dielectric spectra and the epsilon-near-zero
//!   screening pipeline (crossover detection, loss/stability filters,
//!   element co-occurrence counts);
//! - [`dataset`]: delimited-text dataset ingestion;
//! - [`synth`]: deterministic synthetic composition/spectrum generators used
//!   by benchmarks and smoke tests.
//!
//! Batch evaluation, graph construction and screening run data-parallel under
//! the default `parallel` feature (rayon); disable default features for a
//! fully sequential build. Results are identical either way: per-item work is
//! independent and reductions happen in index order. The [`par`] module is
//! the single dispatch point, and the criterion bench suite compares its
//! dispatched and sequential paths on the same workloads.

pub mod chem;
pub mod dataset;
pub mod error;
pub mod graph;
pub mod model;
pub mod par;
pub mod spectra;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
