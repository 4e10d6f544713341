//! Batch normalization over the channel axis of `[B, T, F, C]` tensors.
//!
//! Training mode normalizes with the biased batch statistics computed over
//! `(B, T, F)` per channel; inference mode uses the running statistics kept
//! by the model. Running updates follow `new = momentum * old +
//! (1 - momentum) * batch`.

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Forward intermediates needed by the backward pass, plus the batch
/// statistics the caller folds into the running estimates.
#[derive(Debug, Clone)]
pub struct BnCache {
    pub x_hat: Tensor,
    pub inv_std: Vec<f64>,
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
    pub count: usize,
}

fn channel_stats(x: &Tensor) -> (Vec<f64>, Vec<f64>, usize) {
    let c = *x.shape().last().unwrap();
    let n = x.numel() / c;
    let mut mean = vec![0.0; c];
    for (i, &v) in x.data().iter().enumerate() {
        mean[i % c] += v;
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut var = vec![0.0; c];
    for (i, &v) in x.data().iter().enumerate() {
        let d = v - mean[i % c];
        var[i % c] += d * d;
    }
    for v in &mut var {
        *v /= n as f64;
    }
    (mean, var, n)
}

pub fn batchnorm_train(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    eps: f64,
) -> Result<(Tensor, BnCache)> {
    let c = *x.shape().last().unwrap();
    if gamma.shape() != [c] || beta.shape() != [c] {
        return Err(Error::dimension("batchnorm params", gamma.shape(), x.shape()));
    }
    let (mean, var, n) = channel_stats(x);
    debug_assert!(n >= 2, "batchnorm in train mode needs at least 2 positions");
    let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + eps).sqrt()).collect();

    let mut x_hat = x.clone();
    for (i, v) in x_hat.data_mut().iter_mut().enumerate() {
        let ch = i % c;
        *v = (*v - mean[ch]) * inv_std[ch];
    }
    let mut y = x_hat.clone();
    let (gd, bd) = (gamma.data(), beta.data());
    for (i, v) in y.data_mut().iter_mut().enumerate() {
        let ch = i % c;
        *v = *v * gd[ch] + bd[ch];
    }
    Ok((
        y,
        BnCache {
            x_hat,
            inv_std,
            batch_mean: mean,
            batch_var: var,
            count: n,
        },
    ))
}

pub fn batchnorm_infer(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    running_mean: &Tensor,
    running_var: &Tensor,
    eps: f64,
) -> Result<Tensor> {
    let c = *x.shape().last().unwrap();
    if gamma.shape() != [c] || running_mean.shape() != [c] {
        return Err(Error::dimension("batchnorm infer", gamma.shape(), x.shape()));
    }
    let mut y = x.clone();
    let (gd, bd) = (gamma.data(), beta.data());
    let (md, vd) = (running_mean.data(), running_var.data());
    for (i, v) in y.data_mut().iter_mut().enumerate() {
        let ch = i % c;
        *v = (*v - md[ch]) / (vd[ch] + eps).sqrt() * gd[ch] + bd[ch];
    }
    Ok(y)
}

/// Backward pass through the training-mode normalization, including the
/// dependence of the batch statistics on the input.
pub fn batchnorm_backward(
    cache: &BnCache,
    gamma: &Tensor,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let c = *grad_out.shape().last().unwrap();
    let n = cache.count as f64;
    let mut dgamma = vec![0.0; c];
    let mut dbeta = vec![0.0; c];
    let mut sum_g = vec![0.0; c];
    let mut sum_g_xhat = vec![0.0; c];
    for (i, &g) in grad_out.data().iter().enumerate() {
        let ch = i % c;
        let xh = cache.x_hat.data()[i];
        dgamma[ch] += g * xh;
        dbeta[ch] += g;
        sum_g[ch] += g;
        sum_g_xhat[ch] += g * xh;
    }
    let mut dx = grad_out.clone();
    let gd = gamma.data();
    for (i, v) in dx.data_mut().iter_mut().enumerate() {
        let ch = i % c;
        let xh = cache.x_hat.data()[i];
        // dx = gamma * inv_std / N * (N*g - sum(g) - x_hat * sum(g*x_hat))
        *v = gd[ch] * cache.inv_std[ch] / n * (n * *v - sum_g[ch] - xh * sum_g_xhat[ch]);
    }
    Ok((
        dx,
        Tensor::new(&[c], dgamma),
        Tensor::new(&[c], dbeta),
    ))
}
