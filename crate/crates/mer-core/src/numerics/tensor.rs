//! Dense row-major tensor of 64-bit reals.
//!
//! `Tensor` is the universal value type of the crate: features, activations,
//! parameters and gradients are all tensors. Shapes are carried at runtime
//! because the model mixes rank-2 (dense layers), rank-3 (sequences) and
//! rank-4 (convolution feature maps) data. All public operations are pure:
//! inputs are never mutated, results are freshly allocated.

use crate::error::{Error, Result};

/// Reduction kind for [`Tensor::reduce`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduce {
    Sum,
    Mean,
    Max,
}

/// Dense n-dimensional array of `f64` in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor from a shape and a flat row-major buffer.
    ///
    /// Panics if `product(shape) != data.len()`; that is a programming error,
    /// not a recoverable condition.
    pub fn new(shape: &[usize], data: Vec<f64>) -> Self {
        let numel: usize = shape.iter().product();
        assert_eq!(
            numel,
            data.len(),
            "tensor shape {:?} wants {} elements, got {}",
            shape,
            numel,
            data.len()
        );
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; numel],
        }
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; numel],
        }
    }

    /// Rank-0 tensor holding a single value.
    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![],
            data: vec![value],
        }
    }

    /// Identity matrix of size `n`.
    pub fn eye(n: usize) -> Self {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable flat access for owners building or updating a tensor in place.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// The single value of a rank-0 or one-element tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on tensor of shape {:?}", self.shape);
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Flat row-major offset of a multi-index.
    #[inline]
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut off = 0;
        for (i, &ix) in index.iter().enumerate() {
            debug_assert!(ix < self.shape[i], "index {:?} out of shape {:?}", index, self.shape);
            off = off * self.shape[i] + ix;
        }
        off
    }

    #[inline]
    pub fn at(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    #[inline]
    pub fn at_mut(&mut self, index: &[usize]) -> &mut f64 {
        let off = self.offset(index);
        &mut self.data[off]
    }

    /// Same data under a new shape; element count must match.
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        let numel: usize = shape.iter().product();
        if numel != self.data.len() {
            return Err(Error::dimension("reshape", &self.shape, shape));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two same-shape tensors.
    pub fn zip(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::dimension("zip", &self.shape, &other.shape));
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, |a, b| a * b)
    }

    pub fn scale(&self, factor: f64) -> Tensor {
        self.map(|v| v * factor)
    }

    /// In-place `self += other`, used by gradient accumulation on owned buffers.
    pub fn add_assign(&mut self, other: &Tensor) {
        assert_eq!(self.shape, other.shape, "add_assign shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
    }

    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.rank() != 2 || other.rank() != 2 || self.shape[1] != other.shape[0] {
            return Err(Error::dimension("matmul", &self.shape, &other.shape));
        }
        let (m, k) = (self.shape[0], self.shape[1]);
        let n = other.shape[1];
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &self.data[i * k..(i + 1) * k];
            let dst = &mut out[i * n..(i + 1) * n];
            for (p, &a) in row.iter().enumerate() {
                let brow = &other.data[p * n..(p + 1) * n];
                for (d, &b) in dst.iter_mut().zip(brow.iter()) {
                    *d += a * b;
                }
            }
        }
        Ok(Tensor {
            shape: vec![m, n],
            data: out,
        })
    }

    /// Transpose of a rank-2 tensor.
    pub fn transpose2(&self) -> Result<Tensor> {
        if self.rank() != 2 {
            return Err(Error::dimension("transpose2", &self.shape, &[]));
        }
        let (m, n) = (self.shape[0], self.shape[1]);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.data[i * n + j];
            }
        }
        Ok(Tensor {
            shape: vec![n, m],
            data: out,
        })
    }

    /// Reduction over the named axes; remaining axes keep their order.
    ///
    /// Reducing every axis yields a rank-0 tensor. `Mean` divides by the
    /// number of reduced positions, `Max` takes the running maximum.
    pub fn reduce(&self, op: Reduce, axes: &[usize]) -> Result<Tensor> {
        for &ax in axes {
            if ax >= self.rank() {
                return Err(Error::dimension("reduce axis", &self.shape, &[ax]));
            }
        }
        let mut reduce_mask = vec![false; self.rank()];
        for &ax in axes {
            reduce_mask[ax] = true;
        }
        let out_shape: Vec<usize> = self
            .shape
            .iter()
            .enumerate()
            .filter(|(i, _)| !reduce_mask[*i])
            .map(|(_, &d)| d)
            .collect();
        let out_numel: usize = out_shape.iter().product();
        let reduced_count: usize = self
            .shape
            .iter()
            .enumerate()
            .filter(|(i, _)| reduce_mask[*i])
            .map(|(_, &d)| d)
            .product();
        if reduced_count == 0 || self.numel() == 0 {
            return Err(Error::InvalidInput("reduce over empty tensor".into()));
        }

        let init = match op {
            Reduce::Max => f64::NEG_INFINITY,
            _ => 0.0,
        };
        let mut out = vec![init; out_numel];

        // Walk the input once, projecting each flat offset onto the kept axes.
        let mut index = vec![0usize; self.rank()];
        for &v in &self.data {
            let mut out_off = 0;
            for (i, &ix) in index.iter().enumerate() {
                if !reduce_mask[i] {
                    out_off = out_off * self.shape[i] + ix;
                }
            }
            match op {
                Reduce::Sum | Reduce::Mean => out[out_off] += v,
                Reduce::Max => {
                    if v > out[out_off] {
                        out[out_off] = v;
                    }
                }
            }
            // row-major increment
            for i in (0..self.rank()).rev() {
                index[i] += 1;
                if index[i] < self.shape[i] {
                    break;
                }
                index[i] = 0;
            }
        }
        if op == Reduce::Mean {
            let inv = 1.0 / reduced_count as f64;
            for v in &mut out {
                *v *= inv;
            }
        }
        Ok(Tensor {
            shape: out_shape,
            data: out,
        })
    }
}
