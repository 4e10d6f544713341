//! The training objective: masked RMSE loss over both output channels plus
//! ElasticNet regularization of the convolution weights and activity.

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Masked RMSE loss.
///
/// `loss = (rmse over valence + rmse over arousal) / 2`, each RMSE taken
/// over mask-active positions only. Returns the loss and its analytic
/// gradient with respect to the predictions (zero at masked positions).
pub fn rmse_loss(pred: &Tensor, target: &Tensor, mask: &Tensor) -> Result<(f64, Tensor)> {
    if pred.shape() != target.shape() || pred.rank() != 3 || pred.shape()[2] != 2 {
        return Err(Error::dimension("rmse_loss", pred.shape(), target.shape()));
    }
    let [b, l, _]: [usize; 3] = pred.shape().try_into().unwrap();
    if mask.shape() != [b, l] {
        return Err(Error::dimension("rmse_loss mask", mask.shape(), &[b, l]));
    }
    let mut sq = [0.0f64; 2];
    let mut n = 0usize;
    for bi in 0..b {
        for t in 0..l {
            if mask.at(&[bi, t]) == 0.0 {
                continue;
            }
            n += 1;
            for c in 0..2 {
                let d = pred.at(&[bi, t, c]) - target.at(&[bi, t, c]);
                sq[c] += d * d;
            }
        }
    }
    if n == 0 {
        return Err(Error::InvalidInput("rmse_loss: all positions masked".into()));
    }
    let rmse = [(sq[0] / n as f64).sqrt(), (sq[1] / n as f64).sqrt()];
    let loss = 0.5 * (rmse[0] + rmse[1]);

    let mut grad = Tensor::zeros(pred.shape());
    for bi in 0..b {
        for t in 0..l {
            if mask.at(&[bi, t]) == 0.0 {
                continue;
            }
            for c in 0..2 {
                if rmse[c] == 0.0 {
                    continue; // flat minimum, subgradient zero
                }
                let d = pred.at(&[bi, t, c]) - target.at(&[bi, t, c]);
                *grad.at_mut(&[bi, t, c]) = 0.5 * d / (n as f64 * rmse[c]);
            }
        }
    }
    Ok((loss, grad))
}

/// ElasticNet penalty over the convolution kernel (weights) and the raw
/// convolution output (activity):
///
/// ```text
/// penalty = l1 * sum|w| + l2 * sum(w^2)
///         + (l1 * sum|a| + l2 * sum(a^2)) / batch_size
/// ```
///
/// The activity terms divide by the batch size so the penalty scale does not
/// depend on it. Returns the penalty plus the gradients for the kernel and
/// for the activation backward pass. The subgradient of `|.|` at zero is
/// taken as zero.
pub fn elasticnet_penalty(
    kernel: &Tensor,
    activations: &Tensor,
    l1: f64,
    l2: f64,
    batch_size: usize,
) -> (f64, Tensor, Tensor) {
    let weight_term: f64 = kernel
        .data()
        .iter()
        .map(|&w| l1 * w.abs() + l2 * w * w)
        .sum();
    let act_term: f64 = activations
        .data()
        .iter()
        .map(|&a| l1 * a.abs() + l2 * a * a)
        .sum::<f64>()
        / batch_size as f64;
    let dkernel = kernel.map(|w| l1 * w.signum_or_zero() + 2.0 * l2 * w);
    let inv_b = 1.0 / batch_size as f64;
    let dact = activations.map(|a| (l1 * a.signum_or_zero() + 2.0 * l2 * a) * inv_b);
    (weight_term + act_term, dkernel, dact)
}

trait SignumOrZero {
    fn signum_or_zero(self) -> f64;
}

impl SignumOrZero for f64 {
    fn signum_or_zero(self) -> f64 {
        if self == 0.0 {
            0.0
        } else {
            self.signum()
        }
    }
}
