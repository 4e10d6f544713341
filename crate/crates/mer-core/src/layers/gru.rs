//! Gated recurrent unit, single-direction and bidirectional.
//!
//! Recurrence (update gate `z`, reset gate `r`, tanh candidate `c`, reset
//! applied to the previous state before the candidate's recurrent product):
//!
//! ```text
//! z_t = sigmoid(x_t W_z + h_{t-1} U_z + b_z)
//! r_t = sigmoid(x_t W_r + h_{t-1} U_r + b_r)
//! c_t = tanh(x_t W_h + (r_t * h_{t-1}) U_h + b_h)
//! h_t = z_t * h_{t-1} + (1 - z_t) * c_t
//! ```
//!
//! The initial state is zero. The bidirectional wrapper runs a second set of
//! weights over the time-reversed input and concatenates per step, forward
//! half first.

use crate::error::{Error, Result};
use crate::numerics::Tensor;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Borrowed weight set of one direction. Input weights are `[D, H]`,
/// recurrent weights `[H, H]`, biases `[H]`.
#[derive(Debug, Clone, Copy)]
pub struct GruWeights<'a> {
    pub w_z: &'a Tensor,
    pub w_r: &'a Tensor,
    pub w_h: &'a Tensor,
    pub u_z: &'a Tensor,
    pub u_r: &'a Tensor,
    pub u_h: &'a Tensor,
    pub b_z: &'a Tensor,
    pub b_r: &'a Tensor,
    pub b_h: &'a Tensor,
}

/// Owned gradient set matching [`GruWeights`].
#[derive(Debug, Clone)]
pub struct GruGrads {
    pub w_z: Tensor,
    pub w_r: Tensor,
    pub w_h: Tensor,
    pub u_z: Tensor,
    pub u_r: Tensor,
    pub u_h: Tensor,
    pub b_z: Tensor,
    pub b_r: Tensor,
    pub b_h: Tensor,
}

impl GruGrads {
    fn zeros_like(w: &GruWeights) -> Self {
        GruGrads {
            w_z: Tensor::zeros(w.w_z.shape()),
            w_r: Tensor::zeros(w.w_r.shape()),
            w_h: Tensor::zeros(w.w_h.shape()),
            u_z: Tensor::zeros(w.u_z.shape()),
            u_r: Tensor::zeros(w.u_r.shape()),
            u_h: Tensor::zeros(w.u_h.shape()),
            b_z: Tensor::zeros(w.b_z.shape()),
            b_r: Tensor::zeros(w.b_r.shape()),
            b_h: Tensor::zeros(w.b_h.shape()),
        }
    }
}

/// Per-step forward intermediates of one direction.
#[derive(Debug, Clone)]
pub struct GruCache {
    x: Tensor,            // [B, L, D]
    h_prev: Vec<Tensor>,  // state entering each step, [B, H]
    z: Vec<Tensor>,
    r: Vec<Tensor>,
    c: Vec<Tensor>,
    hr: Vec<Tensor>,      // r * h_prev
}

/// Copies time step `t` of a `[B, L, D]` tensor into a `[B, D]` matrix.
fn time_slice(x: &Tensor, t: usize) -> Tensor {
    let [b, l, d]: [usize; 3] = x.shape().try_into().unwrap();
    let mut out = Tensor::zeros(&[b, d]);
    for bi in 0..b {
        let src = (bi * l + t) * d;
        let dst = bi * d;
        out.data_mut()[dst..dst + d].copy_from_slice(&x.data()[src..src + d]);
    }
    out
}

fn set_time_slice(out: &mut Tensor, t: usize, value: &Tensor) {
    let [b, l, d]: [usize; 3] = out.shape().try_into().unwrap();
    for bi in 0..b {
        let dst = (bi * l + t) * d;
        let src = bi * d;
        out.data_mut()[dst..dst + d].copy_from_slice(&value.data()[src..src + d]);
    }
}

/// Reverses the time axis of a `[B, L, D]` tensor.
pub fn reverse_time(x: &Tensor) -> Tensor {
    let [b, l, d]: [usize; 3] = x.shape().try_into().unwrap();
    let mut out = Tensor::zeros(x.shape());
    for bi in 0..b {
        for t in 0..l {
            let src = (bi * l + t) * d;
            let dst = (bi * l + (l - 1 - t)) * d;
            out.data_mut()[dst..dst + d].copy_from_slice(&x.data()[src..src + d]);
        }
    }
    out
}

fn gate_preact(x_t: &Tensor, h: &Tensor, w: &Tensor, u: &Tensor, b: &Tensor) -> Tensor {
    let mut a = x_t.matmul(w).unwrap();
    a.add_assign(&h.matmul(u).unwrap());
    let hdim = b.shape()[0];
    for (i, v) in a.data_mut().iter_mut().enumerate() {
        *v += b.data()[i % hdim];
    }
    a
}

/// Runs one direction over `[B, L, D]`, returning the state sequence
/// `[B, L, H]` and the cache for the backward pass.
pub fn gru_forward(x: &Tensor, w: &GruWeights) -> Result<(Tensor, GruCache)> {
    if x.rank() != 3 {
        return Err(Error::dimension("gru input", x.shape(), &[]));
    }
    let [b, l, d]: [usize; 3] = x.shape().try_into().unwrap();
    if w.w_z.shape()[0] != d {
        return Err(Error::dimension("gru input width", x.shape(), w.w_z.shape()));
    }
    let h_dim = w.w_z.shape()[1];

    let mut out = Tensor::zeros(&[b, l, h_dim]);
    let mut cache = GruCache {
        x: x.clone(),
        h_prev: Vec::with_capacity(l),
        z: Vec::with_capacity(l),
        r: Vec::with_capacity(l),
        c: Vec::with_capacity(l),
        hr: Vec::with_capacity(l),
    };
    let mut h = Tensor::zeros(&[b, h_dim]);
    for t in 0..l {
        let x_t = time_slice(x, t);
        let z = gate_preact(&x_t, &h, w.w_z, w.u_z, w.b_z).map(sigmoid);
        let r = gate_preact(&x_t, &h, w.w_r, w.u_r, w.b_r).map(sigmoid);
        let hr = r.mul(&h)?;
        let mut a_h = x_t.matmul(w.w_h)?;
        a_h.add_assign(&hr.matmul(w.u_h)?);
        for (i, v) in a_h.data_mut().iter_mut().enumerate() {
            *v += w.b_h.data()[i % h_dim];
        }
        let c = a_h.map(f64::tanh);

        let mut h_new = Tensor::zeros(&[b, h_dim]);
        for i in 0..h_new.numel() {
            let zv = z.data()[i];
            h_new.data_mut()[i] = zv * h.data()[i] + (1.0 - zv) * c.data()[i];
        }
        set_time_slice(&mut out, t, &h_new);

        cache.h_prev.push(h);
        cache.z.push(z);
        cache.r.push(r);
        cache.c.push(c);
        cache.hr.push(hr);
        h = h_new;
    }
    Ok((out, cache))
}

/// Backpropagation through time for one direction. `grad_out` is `[B, L, H]`;
/// returns the input gradient and the weight gradients.
pub fn gru_backward(
    w: &GruWeights,
    cache: &GruCache,
    grad_out: &Tensor,
) -> Result<(Tensor, GruGrads)> {
    let [b, l, _d]: [usize; 3] = cache.x.shape().try_into().unwrap();
    let h_dim = w.w_z.shape()[1];
    if grad_out.shape() != [b, l, h_dim] {
        return Err(Error::dimension("gru_backward", grad_out.shape(), cache.x.shape()));
    }

    let mut grads = GruGrads::zeros_like(w);
    let mut dx = Tensor::zeros(cache.x.shape());
    let mut dh = Tensor::zeros(&[b, h_dim]); // gradient carried from step t+1

    for t in (0..l).rev() {
        dh.add_assign(&time_slice(grad_out, t));
        let (z, r, c, h_prev, hr) = (
            &cache.z[t],
            &cache.r[t],
            &cache.c[t],
            &cache.h_prev[t],
            &cache.hr[t],
        );

        let mut da_z = Tensor::zeros(&[b, h_dim]);
        let mut da_h = Tensor::zeros(&[b, h_dim]);
        for i in 0..da_z.numel() {
            let g = dh.data()[i];
            let zv = z.data()[i];
            let cv = c.data()[i];
            // dz = g * (h_prev - c), through the sigmoid
            da_z.data_mut()[i] = g * (h_prev.data()[i] - cv) * zv * (1.0 - zv);
            // dc = g * (1 - z), through the tanh
            da_h.data_mut()[i] = g * (1.0 - zv) * (1.0 - cv * cv);
        }
        let dhr = da_h.matmul(&w.u_h.transpose2()?)?;
        let mut da_r = Tensor::zeros(&[b, h_dim]);
        for i in 0..da_r.numel() {
            let rv = r.data()[i];
            da_r.data_mut()[i] = dhr.data()[i] * h_prev.data()[i] * rv * (1.0 - rv);
        }

        // parameter gradients
        let x_t = time_slice(&cache.x, t);
        let x_t_t = x_t.transpose2()?;
        let h_prev_t = h_prev.transpose2()?;
        grads.w_z.add_assign(&x_t_t.matmul(&da_z)?);
        grads.w_r.add_assign(&x_t_t.matmul(&da_r)?);
        grads.w_h.add_assign(&x_t_t.matmul(&da_h)?);
        grads.u_z.add_assign(&h_prev_t.matmul(&da_z)?);
        grads.u_r.add_assign(&h_prev_t.matmul(&da_r)?);
        grads.u_h.add_assign(&hr.transpose2()?.matmul(&da_h)?);
        for i in 0..da_z.numel() {
            let ch = i % h_dim;
            grads.b_z.data_mut()[ch] += da_z.data()[i];
            grads.b_r.data_mut()[ch] += da_r.data()[i];
            grads.b_h.data_mut()[ch] += da_h.data()[i];
        }

        // input gradient
        let mut dx_t = da_z.matmul(&w.w_z.transpose2()?)?;
        dx_t.add_assign(&da_r.matmul(&w.w_r.transpose2()?)?);
        dx_t.add_assign(&da_h.matmul(&w.w_h.transpose2()?)?);
        set_time_slice(&mut dx, t, &dx_t);

        // state gradient into step t-1
        let mut dh_prev = da_z.matmul(&w.u_z.transpose2()?)?;
        dh_prev.add_assign(&da_r.matmul(&w.u_r.transpose2()?)?);
        for i in 0..dh_prev.numel() {
            dh_prev.data_mut()[i] +=
                dh.data()[i] * z.data()[i] + dhr.data()[i] * r.data()[i];
        }
        dh = dh_prev;
    }
    Ok((dx, grads))
}

/// Cache of both directions of a bidirectional pass.
#[derive(Debug, Clone)]
pub struct BiGruCache {
    pub fwd: GruCache,
    pub bwd: GruCache,
}

/// Bidirectional GRU: forward weights over `x`, backward weights over the
/// time-reversed `x`, outputs concatenated per step as `[fwd, bwd]`.
pub fn bigru_forward(
    x: &Tensor,
    fwd: &GruWeights,
    bwd: &GruWeights,
) -> Result<(Tensor, BiGruCache)> {
    let (out_f, cache_f) = gru_forward(x, fwd)?;
    let x_rev = reverse_time(x);
    let (out_b_rev, cache_b) = gru_forward(&x_rev, bwd)?;
    let out_b = reverse_time(&out_b_rev);

    let [b, l, h]: [usize; 3] = out_f.shape().try_into().unwrap();
    let mut out = Tensor::zeros(&[b, l, 2 * h]);
    for bi in 0..b {
        for t in 0..l {
            let dst = (bi * l + t) * 2 * h;
            let src = (bi * l + t) * h;
            out.data_mut()[dst..dst + h].copy_from_slice(&out_f.data()[src..src + h]);
            out.data_mut()[dst + h..dst + 2 * h].copy_from_slice(&out_b.data()[src..src + h]);
        }
    }
    Ok((out, BiGruCache { fwd: cache_f, bwd: cache_b }))
}

/// Backward through both directions; returns the input gradient plus the
/// forward- and backward-direction weight gradients.
pub fn bigru_backward(
    fwd: &GruWeights,
    bwd: &GruWeights,
    cache: &BiGruCache,
    grad_out: &Tensor,
) -> Result<(Tensor, GruGrads, GruGrads)> {
    let [b, l, h2]: [usize; 3] = grad_out.shape().try_into().unwrap();
    let h = h2 / 2;
    let mut g_f = Tensor::zeros(&[b, l, h]);
    let mut g_b = Tensor::zeros(&[b, l, h]);
    for bi in 0..b {
        for t in 0..l {
            let src = (bi * l + t) * h2;
            let dst = (bi * l + t) * h;
            g_f.data_mut()[dst..dst + h].copy_from_slice(&grad_out.data()[src..src + h]);
            g_b.data_mut()[dst..dst + h]
                .copy_from_slice(&grad_out.data()[src + h..src + 2 * h]);
        }
    }
    let (dx_f, grads_f) = gru_backward(fwd, &cache.fwd, &g_f)?;
    let g_b_rev = reverse_time(&g_b);
    let (dx_b_rev, grads_b) = gru_backward(bwd, &cache.bwd, &g_b_rev)?;
    let mut dx = dx_f;
    dx.add_assign(&reverse_time(&dx_b_rev));
    Ok((dx, grads_f, grads_b))
}
