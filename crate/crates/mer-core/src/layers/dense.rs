//! Time-distributed fully-connected layer: one weight matrix applied
//! identically at every time step (weights shared across time).

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// `y[b, l, :] = x[b, l, :] W + bias`, linear activation.
pub fn timedist_fc(x: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    if x.rank() != 3 || weight.rank() != 2 || x.shape()[2] != weight.shape()[0] {
        return Err(Error::dimension("timedist_fc", x.shape(), weight.shape()));
    }
    let [b, l, d]: [usize; 3] = x.shape().try_into().unwrap();
    let u = weight.shape()[1];
    if bias.shape() != [u] {
        return Err(Error::dimension("timedist_fc bias", bias.shape(), weight.shape()));
    }
    let flat = x.reshape(&[b * l, d])?;
    let mut y = flat.matmul(weight)?;
    for (i, v) in y.data_mut().iter_mut().enumerate() {
        *v += bias.data()[i % u];
    }
    y.reshape(&[b, l, u])
}

/// Gradients of [`timedist_fc`]: input, weight and bias.
pub fn timedist_fc_backward(
    x: &Tensor,
    weight: &Tensor,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let [b, l, d]: [usize; 3] = x.shape().try_into().unwrap();
    let u = weight.shape()[1];
    if grad_out.shape() != [b, l, u] {
        return Err(Error::dimension("timedist_fc_backward", grad_out.shape(), &[b, l, u]));
    }
    let x2 = x.reshape(&[b * l, d])?;
    let g2 = grad_out.reshape(&[b * l, u])?;
    let dw = x2.transpose2()?.matmul(&g2)?;
    let mut db = Tensor::zeros(&[u]);
    for (i, &g) in g2.data().iter().enumerate() {
        db.data_mut()[i % u] += g;
    }
    let dx = g2.matmul(&weight.transpose2()?)?.reshape(&[b, l, d])?;
    Ok((dx, dw, db))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{uniform_init, Rng};

    #[test]
    fn identity_weights() {
        let mut rng = Rng::new(3);
        let x = uniform_init(&mut rng, &[2, 3, 4], 1.0);
        let y = timedist_fc(&x, &Tensor::eye(4), &Tensor::zeros(&[4])).unwrap();
        assert_eq!(x.data(), y.data());
    }

    #[test]
    fn time_permutation_commutes() {
        let mut rng = Rng::new(7);
        let x = uniform_init(&mut rng, &[1, 4, 3], 1.0);
        let w = uniform_init(&mut rng, &[3, 2], 1.0);
        let bias = uniform_init(&mut rng, &[2], 0.5);
        let y = timedist_fc(&x, &w, &bias).unwrap();

        // swap steps 1 and 3 of the input, outputs swap identically
        let mut xp = x.clone();
        for d in 0..3 {
            let a = x.at(&[0, 1, d]);
            let b = x.at(&[0, 3, d]);
            *xp.at_mut(&[0, 1, d]) = b;
            *xp.at_mut(&[0, 3, d]) = a;
        }
        let yp = timedist_fc(&xp, &w, &bias).unwrap();
        for u in 0..2 {
            assert_eq!(y.at(&[0, 1, u]), yp.at(&[0, 3, u]));
            assert_eq!(y.at(&[0, 3, u]), yp.at(&[0, 1, u]));
        }
    }

    #[test]
    fn matches_per_step_matmul_oracle() {
        let mut rng = Rng::new(9);
        let x = uniform_init(&mut rng, &[2, 3, 4], 1.0);
        let w = uniform_init(&mut rng, &[4, 5], 1.0);
        let bias = uniform_init(&mut rng, &[5], 0.5);
        let y = timedist_fc(&x, &w, &bias).unwrap();
        for b in 0..2 {
            for l in 0..3 {
                let row = Tensor::new(&[1, 4], (0..4).map(|d| x.at(&[b, l, d])).collect());
                let want = row.matmul(&w).unwrap();
                for u in 0..5 {
                    let expect = want.at(&[0, u]) + bias.at(&[u]);
                    assert!((y.at(&[b, l, u]) - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn bias_gradient_counts_positions() {
        // gradient of sum(output) w.r.t. bias equals the number of (b, l)
        // positions contributing
        let mut rng = Rng::new(11);
        let x = uniform_init(&mut rng, &[3, 5, 2], 1.0);
        let w = uniform_init(&mut rng, &[2, 4], 1.0);
        let ones = Tensor::full(&[3, 5, 4], 1.0);
        let (_, _, db) = timedist_fc_backward(&x, &w, &ones).unwrap();
        for u in 0..4 {
            assert_eq!(db.at(&[u]), 15.0);
        }
    }

    #[test]
    fn shape_mismatch_errors() {
        let x = Tensor::zeros(&[1, 2, 3]);
        let w = Tensor::zeros(&[4, 2]);
        assert!(timedist_fc(&x, &w, &Tensor::zeros(&[2])).is_err());
    }
}
