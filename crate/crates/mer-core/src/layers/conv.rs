//! 2-D convolution (cross-correlation) with zero same-padding.
//!
//! Input layout is `[batch, time, freq, channels_in]`, the kernel is
//! `[kh, kw, channels_in, channels_out]`. Padding keeps the time and
//! frequency axes, which the per-step regression head relies on.

use crate::error::{Error, Result};
use crate::numerics::Tensor;

fn check_shapes(x: &Tensor, kernel: &Tensor, bias: &Tensor) -> Result<()> {
    if x.rank() != 4 || kernel.rank() != 4 {
        return Err(Error::dimension("conv2d rank", x.shape(), kernel.shape()));
    }
    if x.shape()[3] != kernel.shape()[2] {
        return Err(Error::dimension("conv2d channels", x.shape(), kernel.shape()));
    }
    if bias.shape() != [kernel.shape()[3]] {
        return Err(Error::dimension("conv2d bias", bias.shape(), kernel.shape()));
    }
    if kernel.shape()[0] % 2 == 0 || kernel.shape()[1] % 2 == 0 {
        return Err(Error::InvalidInput(format!(
            "conv2d kernel sides must be odd for same padding, got {:?}",
            kernel.shape()
        )));
    }
    Ok(())
}

/// Cross-correlation plus bias; output shape equals input shape except for
/// the channel axis.
pub fn conv2d(x: &Tensor, kernel: &Tensor, bias: &Tensor) -> Result<Tensor> {
    check_shapes(x, kernel, bias)?;
    let [b_sz, t_sz, f_sz, ci]: [usize; 4] = x.shape().try_into().unwrap();
    let [kh, kw, _, co]: [usize; 4] = kernel.shape().try_into().unwrap();
    let (ph, pw) = (kh / 2, kw / 2);

    let mut out = Tensor::zeros(&[b_sz, t_sz, f_sz, co]);
    {
        let xd = x.data();
        let kd = kernel.data();
        let od = out.data_mut();
        for b in 0..b_sz {
            for t in 0..t_sz {
                for f in 0..f_sz {
                    let obase = ((b * t_sz + t) * f_sz + f) * co;
                    for dt in 0..kh {
                        let ti = t + dt;
                        if ti < ph || ti - ph >= t_sz {
                            continue;
                        }
                        let ti = ti - ph;
                        for df in 0..kw {
                            let fi = f + df;
                            if fi < pw || fi - pw >= f_sz {
                                continue;
                            }
                            let fi = fi - pw;
                            let xbase = ((b * t_sz + ti) * f_sz + fi) * ci;
                            for c_in in 0..ci {
                                let xv = xd[xbase + c_in];
                                let kbase = ((dt * kw + df) * ci + c_in) * co;
                                for c_out in 0..co {
                                    od[obase + c_out] += xv * kd[kbase + c_out];
                                }
                            }
                        }
                    }
                }
            }
        }
        let bd = bias.data();
        for (i, v) in od.iter_mut().enumerate() {
            *v += bd[i % co];
        }
    }
    Ok(out)
}

/// Gradients of [`conv2d`] with respect to input, kernel and bias.
pub fn conv2d_backward(
    x: &Tensor,
    kernel: &Tensor,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let [b_sz, t_sz, f_sz, ci]: [usize; 4] = x.shape().try_into().unwrap();
    let [kh, kw, _, co]: [usize; 4] = kernel.shape().try_into().unwrap();
    if grad_out.shape() != [b_sz, t_sz, f_sz, co] {
        return Err(Error::dimension("conv2d_backward", grad_out.shape(), x.shape()));
    }
    let (ph, pw) = (kh / 2, kw / 2);

    let mut dx = Tensor::zeros(x.shape());
    let mut dk = Tensor::zeros(kernel.shape());
    let mut db = Tensor::zeros(&[co]);
    {
        let xd = x.data();
        let kd = kernel.data();
        let gd = grad_out.data();
        let dxd = dx.data_mut();
        for b in 0..b_sz {
            for t in 0..t_sz {
                for f in 0..f_sz {
                    let gbase = ((b * t_sz + t) * f_sz + f) * co;
                    for dt in 0..kh {
                        let ti = t + dt;
                        if ti < ph || ti - ph >= t_sz {
                            continue;
                        }
                        let ti = ti - ph;
                        for df in 0..kw {
                            let fi = f + df;
                            if fi < pw || fi - pw >= f_sz {
                                continue;
                            }
                            let fi = fi - pw;
                            let xbase = ((b * t_sz + ti) * f_sz + fi) * ci;
                            for c_in in 0..ci {
                                let kbase = ((dt * kw + df) * ci + c_in) * co;
                                let mut acc = 0.0;
                                for c_out in 0..co {
                                    let g = gd[gbase + c_out];
                                    acc += g * kd[kbase + c_out];
                                    dk.data_mut()[kbase + c_out] += xd[xbase + c_in] * g;
                                }
                                dxd[xbase + c_in] += acc;
                            }
                        }
                    }
                    for c_out in 0..co {
                        db.data_mut()[c_out] += gd[gbase + c_out];
                    }
                }
            }
        }
    }
    Ok((dx, dk, db))
}
