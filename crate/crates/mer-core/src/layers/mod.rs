//! Forward and hand-derived backward passes for every layer of the network:
//! 2-D convolution, batch normalization, ReLU, dropout, time-distributed
//! dense, bidirectional GRU and maxout.
//!
//! Layers are free functions over tensors. Each training-mode forward
//! returns the intermediates its backward needs; the caller owns parameter
//! storage and gradient accumulation.

mod batchnorm;
mod conv;
mod dense;
mod dropout;
mod gru;
mod maxout;

pub use batchnorm::{batchnorm_backward, batchnorm_infer, batchnorm_train, BnCache};
pub use conv::{conv2d, conv2d_backward};
pub use dense::{timedist_fc, timedist_fc_backward};
pub use dropout::{dropout_backward, dropout_train};
pub use gru::{
    bigru_backward, bigru_forward, gru_backward, gru_forward, reverse_time, BiGruCache,
    GruCache, GruGrads, GruWeights,
};
pub use maxout::{maxout, maxout_backward, MaxoutCache};

use crate::numerics::Tensor;

/// Forward-pass mode: training uses batch statistics and dropout, inference
/// uses running statistics and is deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Rectified linear unit.
pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Gradient of [`relu`]; the subgradient at exactly zero is zero.
pub fn relu_backward(x: &Tensor, grad_out: &Tensor) -> Tensor {
    x.zip(grad_out, |xv, g| if xv > 0.0 { g } else { 0.0 })
        .expect("relu_backward shapes match by construction")
}
