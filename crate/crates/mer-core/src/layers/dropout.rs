//! Inverted dropout: training zeroes each element with probability `rate`
//! and scales survivors by `1 / (1 - rate)`, so inference is the identity.

use crate::error::{Error, Result};
use crate::numerics::{Rng, Tensor};

/// Training-mode dropout. The returned mask holds `0` or `1/(1-rate)` per
/// element; the backward pass is multiplication by the same mask.
pub fn dropout_train(x: &Tensor, rate: f64, rng: &mut Rng) -> Result<(Tensor, Tensor)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate must be in [0, 1), got {rate}")));
    }
    if rate == 0.0 {
        return Ok((x.clone(), Tensor::full(x.shape(), 1.0)));
    }
    let keep_scale = 1.0 / (1.0 - rate);
    let mut mask = Tensor::zeros(x.shape());
    for v in mask.data_mut() {
        if rng.next_f64() >= rate {
            *v = keep_scale;
        }
    }
    let y = x.mul(&mask)?;
    Ok((y, mask))
}

pub fn dropout_backward(mask: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    grad_out.mul(mask)
}
