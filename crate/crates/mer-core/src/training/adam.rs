//! Adam optimizer with bias correction.

use std::collections::BTreeMap;

use crate::model::{ParamGrads, ParamMap};
use crate::numerics::Tensor;

/// Per-parameter first and second moment estimates plus the step counter.
#[derive(Debug, Clone, Default)]
pub struct AdamState {
    m: BTreeMap<String, Tensor>,
    v: BTreeMap<String, Tensor>,
    pub step: u64,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// One Adam update:
///
/// ```text
/// m <- b1 m + (1 - b1) g        v <- b2 v + (1 - b2) g^2
/// m_hat = m / (1 - b1^t)        v_hat = v / (1 - b2^t)
/// theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
/// ```
pub fn adam_step(
    params: &mut ParamMap,
    grads: &ParamGrads,
    state: &mut AdamState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    for (name, grad) in grads {
        debug_assert!(ParamMap::is_trainable(name), "gradient for {name}");
        let m = state
            .m
            .entry(name.clone())
            .or_insert_with(|| Tensor::zeros(grad.shape()));
        let v = state
            .v
            .entry(name.clone())
            .or_insert_with(|| Tensor::zeros(grad.shape()));
        let param = params.get_mut(name);
        for i in 0..grad.numel() {
            let g = grad.data()[i];
            let mi = beta1 * m.data()[i] + (1.0 - beta1) * g;
            let vi = beta2 * v.data()[i] + (1.0 - beta2) * g * g;
            m.data_mut()[i] = mi;
            v.data_mut()[i] = vi;
            param.data_mut()[i] -= lr * (mi / bc1) / ((vi / bc2).sqrt() + eps);
        }
    }
}
