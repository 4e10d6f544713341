//! Mel scale conversions and the triangular mel filterbank.
//!
//! The HTK-style scale is used: `mel = 2595 * log10(1 + f / 700)`.

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Frequency in Hz to mel. Strictly increasing; errors on negative input.
pub fn hz_to_mel(f: f64) -> Result<f64> {
    if f < 0.0 || !f.is_finite() {
        return Err(Error::InvalidInput(format!("negative or non-finite frequency {f}")));
    }
    Ok(2595.0 * (1.0 + f / 700.0).log10())
}

/// Mel back to Hz; inverse of [`hz_to_mel`].
pub fn mel_to_hz(m: f64) -> Result<f64> {
    if m < 0.0 || !m.is_finite() {
        return Err(Error::InvalidInput(format!("negative or non-finite mel {m}")));
    }
    Ok(700.0 * (10f64.powf(m / 2595.0) - 1.0))
}

/// Bank of triangular filters on the mel scale, peak height 1.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
    /// `[n_mels, n_fft/2 + 1]`
    pub weights: Tensor,
    pub n_fft: usize,
    pub sample_rate: u32,
}

impl MelFilterbank {
    /// Builds `n_mels` triangles with edges equally spaced in mel between
    /// `f_min` and `f_max`, sampled at the FFT bin frequencies of an
    /// `n_fft`-point transform at `sample_rate`.
    pub fn new(
        n_mels: usize,
        f_min: f64,
        f_max: f64,
        sample_rate: u32,
        n_fft: usize,
    ) -> Result<Self> {
        if n_mels == 0 {
            return Err(Error::Config("filterbank needs at least one band".into()));
        }
        let nyquist = sample_rate as f64 / 2.0;
        if !(0.0..nyquist).contains(&f_min) || f_max <= f_min || f_max > nyquist {
            return Err(Error::Config(format!(
                "filterbank range [{f_min}, {f_max}] invalid for nyquist {nyquist}"
            )));
        }
        if !n_fft.is_power_of_two() {
            return Err(Error::Config(format!("n_fft {n_fft} must be a power of two")));
        }
        let n_bins = n_fft / 2 + 1;
        let mel_lo = hz_to_mel(f_min)?;
        let mel_hi = hz_to_mel(f_max)?;
        let mut edges = Vec::with_capacity(n_mels + 2);
        for i in 0..n_mels + 2 {
            let mel = mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64;
            edges.push(mel_to_hz(mel)?);
        }

        let mut weights = Tensor::zeros(&[n_mels, n_bins]);
        for m in 0..n_mels {
            let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
            for k in 0..n_bins {
                let freq = k as f64 * sample_rate as f64 / n_fft as f64;
                let rising = if center > left {
                    (freq - left) / (center - left)
                } else {
                    0.0
                };
                let falling = if right > center {
                    (right - freq) / (right - center)
                } else {
                    0.0
                };
                let w = rising.min(falling).max(0.0);
                *weights.at_mut(&[m, k]) = w;
            }
        }
        Ok(MelFilterbank {
            n_mels,
            f_min,
            f_max,
            weights,
            n_fft,
            sample_rate,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Projects a power spectrum `[bins]` onto the mel bands `[n_mels]`.
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        let n_bins = self.n_bins();
        debug_assert_eq!(power.len(), n_bins);
        (0..self.n_mels)
            .map(|m| {
                let row = &self.weights.data()[m * n_bins..(m + 1) * n_bins];
                row.iter().zip(power.iter()).map(|(w, p)| w * p).sum()
            })
            .collect()
    }
}
