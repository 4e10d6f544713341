//! Maxout output head: the maximum over K affine pieces per time step,
//! weights shared across time. Used as the regression layer because the
//! pointwise max of affine maps approximates convex piecewise-linear
//! functions.

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Argmax indices recorded by the forward pass; gradient flows only through
/// the winning piece.
#[derive(Debug, Clone)]
pub struct MaxoutCache {
    pub winners: Vec<u32>, // [B * L * O], piece index per output position
}

/// `y[b,l,o] = max_k (x[b,l,:] . pieces[k,:,o] + bias[k,o])`.
///
/// `pieces` is `[K, D, O]`, `bias` is `[K, O]`. Ties resolve to the lowest
/// piece index.
pub fn maxout(x: &Tensor, pieces: &Tensor, bias: &Tensor) -> Result<(Tensor, MaxoutCache)> {
    if x.rank() != 3 || pieces.rank() != 3 || x.shape()[2] != pieces.shape()[1] {
        return Err(Error::dimension("maxout", x.shape(), pieces.shape()));
    }
    let [b, l, d]: [usize; 3] = x.shape().try_into().unwrap();
    let [k, _, o]: [usize; 3] = pieces.shape().try_into().unwrap();
    if k < 2 {
        return Err(Error::InvalidInput(format!("maxout needs K >= 2 pieces, got {k}")));
    }
    if bias.shape() != [k, o] {
        return Err(Error::dimension("maxout bias", bias.shape(), pieces.shape()));
    }

    let mut out = Tensor::zeros(&[b, l, o]);
    let mut winners = vec![0u32; b * l * o];
    for bi in 0..b {
        for t in 0..l {
            let xrow = &x.data()[(bi * l + t) * d..(bi * l + t) * d + d];
            for oi in 0..o {
                let mut best = f64::NEG_INFINITY;
                let mut best_k = 0u32;
                for ki in 0..k {
                    let mut score = bias.at(&[ki, oi]);
                    for (di, &xv) in xrow.iter().enumerate() {
                        score += xv * pieces.at(&[ki, di, oi]);
                    }
                    if score > best {
                        best = score;
                        best_k = ki as u32;
                    }
                }
                *out.at_mut(&[bi, t, oi]) = best;
                winners[(bi * l + t) * o + oi] = best_k;
            }
        }
    }
    Ok((out, MaxoutCache { winners }))
}

/// Gradients of [`maxout`]; only the argmax piece of each position receives
/// gradient.
pub fn maxout_backward(
    x: &Tensor,
    pieces: &Tensor,
    cache: &MaxoutCache,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let [b, l, d]: [usize; 3] = x.shape().try_into().unwrap();
    let [k, _, o]: [usize; 3] = pieces.shape().try_into().unwrap();
    if grad_out.shape() != [b, l, o] {
        return Err(Error::dimension("maxout_backward", grad_out.shape(), &[b, l, o]));
    }
    let mut dx = Tensor::zeros(x.shape());
    let mut dpieces = Tensor::zeros(pieces.shape());
    let mut dbias = Tensor::zeros(&[k, o]);
    for bi in 0..b {
        for t in 0..l {
            let base = (bi * l + t) * d;
            for oi in 0..o {
                let g = grad_out.at(&[bi, t, oi]);
                if g == 0.0 {
                    continue;
                }
                let ki = cache.winners[(bi * l + t) * o + oi] as usize;
                *dbias.at_mut(&[ki, oi]) += g;
                for di in 0..d {
                    *dpieces.at_mut(&[ki, di, oi]) += x.data()[base + di] * g;
                    dx.data_mut()[base + di] += pieces.at(&[ki, di, oi]) * g;
                }
            }
        }
    }
    Ok((dx, dpieces, dbias))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{uniform_init, Rng};

    #[test]
    fn plus_minus_pieces_compute_absolute_value() {
        // K=2 with pieces (+x, -x) on scalar input -> |x|
        let pieces = Tensor::new(&[2, 1, 1], vec![1.0, -1.0]);
        let bias = Tensor::zeros(&[2, 1]);
        let x = Tensor::new(&[1, 4, 1], vec![0.5, -0.75, 0.0, -2.0]);
        let (y, _) = maxout(&x, &pieces, &bias).unwrap();
        assert_eq!(y.data(), &[0.5, 0.75, 0.0, 2.0]);
    }

    #[test]
    fn identical_pieces_reduce_to_linear() {
        let mut rng = Rng::new(2);
        let w = uniform_init(&mut rng, &[3], 1.0);
        let mut pieces = Tensor::zeros(&[2, 3, 1]);
        for k in 0..2 {
            for d in 0..3 {
                *pieces.at_mut(&[k, d, 0]) = w.at(&[d]);
            }
        }
        let bias = Tensor::full(&[2, 1], 0.25);
        let x = uniform_init(&mut rng, &[2, 3, 3], 1.0);
        let (y, _) = maxout(&x, &pieces, &bias).unwrap();
        for b in 0..2 {
            for t in 0..3 {
                let want: f64 =
                    (0..3).map(|d| x.at(&[b, t, d]) * w.at(&[d])).sum::<f64>() + 0.25;
                assert!((y.at(&[b, t, 0]) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_single_piece() {
        let pieces = Tensor::zeros(&[1, 2, 1]);
        let bias = Tensor::zeros(&[1, 1]);
        let x = Tensor::zeros(&[1, 1, 2]);
        assert!(maxout(&x, &pieces, &bias).is_err());
    }

    #[test]
    fn gradient_flows_only_through_winner() {
        let pieces = Tensor::new(&[2, 1, 1], vec![1.0, -1.0]);
        let bias = Tensor::zeros(&[2, 1]);
        let x = Tensor::new(&[1, 1, 1], vec![0.5]); // piece 0 wins
        let (_, cache) = maxout(&x, &pieces, &bias).unwrap();
        let g = Tensor::full(&[1, 1, 1], 1.0);
        let (dx, dp, db) = maxout_backward(&x, &pieces, &cache, &g).unwrap();
        assert_eq!(dx.item(), 1.0); // d|x|/dx at x>0
        assert_eq!(dp.at(&[0, 0, 0]), 0.5);
        assert_eq!(dp.at(&[1, 0, 0]), 0.0);
        assert_eq!(db.at(&[0, 0]), 1.0);
        assert_eq!(db.at(&[1, 0]), 0.0);
    }
}
