//! Continuous valence-arousal music emotion regression.
//!
//! The crate implements the full pipeline from raw audio to trained model:
//!
//! * [`numerics`] — dense `f64` tensors and a documented, seedable RNG;
//! * [`audio`] — WAV ingestion and log mel-band energy features from 500 ms
//!   segments;
//! * [`dataset`] — CSV ingestion of per-song feature/annotation sequences,
//!   synthetic fixtures, sequence windowing and mini-batching;
//! * [`layers`] — forward and hand-derived backward passes for 2-D
//!   convolution, batch normalization, ReLU, dropout, time-distributed dense,
//!   bidirectional GRU and maxout;
//! * [`model`] — the stacked convolutional-recurrent architecture in its
//!   branched (one head per emotion dimension) and unbranched variants, with
//!   parameter counting and a bit-exact checkpoint format;
//! * [`training`] — RMSE loss, ElasticNet regularization, Adam, and the
//!   backpropagation-through-time training loop with early stopping;
//! * [`evaluation`] — RMSE metrics, full-song evaluation and multi-run
//!   aggregation.
//!
//! Everything is plain `f64` on the CPU and deterministic given a seed: two
//! runs with the same seed produce bitwise-identical parameters, reports and
//! checkpoints.

pub mod audio;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod layers;
pub mod model;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
pub use numerics::{Rng, Tensor};
