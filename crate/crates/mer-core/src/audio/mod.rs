//! Raw audio features: log mel-band energies per 500 ms segment.
//!
//! The pipeline per segment: Hann-windowed power spectrogram over 60 ms
//! frames with a 10 ms hop, mean power per FFT bin across the segment's
//! frames, projection onto a triangular mel filterbank, then `log(x + 1e-10)`.

mod fft;
mod mel;
mod wav;

pub use fft::fft_in_place;
pub use mel::{hz_to_mel, mel_to_hz, MelFilterbank};
pub use wav::{read_wav, read_wav_bytes, write_wav_mono16};

use crate::dataset::FeatureSequence;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Analysis frame length.
pub const WIN_MS: u32 = 60;
/// Analysis hop (60 ms frames with 50 ms overlap).
pub const HOP_MS: u32 = 10;
/// Feature segment length; one feature vector (and one annotation) each.
pub const SEGMENT_MS: u32 = 500;
/// Floor added before the log so silence stays finite.
pub const LOG_EPS: f64 = 1e-10;
/// Default mel band count.
pub const DEFAULT_N_MELS: usize = 64;

/// Mono PCM audio, samples in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn duration_ms(&self) -> f64 {
        self.samples.len() as f64 * 1000.0 / self.sample_rate as f64
    }
}

fn samples_for_ms(sample_rate: u32, ms: u32) -> usize {
    ((sample_rate as u64 * ms as u64 + 500) / 1000) as usize
}

/// Analysis window length in samples for a clip at `sample_rate`.
pub fn stft_window_len(sample_rate: u32) -> usize {
    samples_for_ms(sample_rate, WIN_MS)
}

/// FFT size: next power of two at or above the window length.
pub fn stft_nfft(sample_rate: u32) -> usize {
    stft_window_len(sample_rate).next_power_of_two()
}

/// Hann-windowed magnitude-squared spectrogram.
///
/// Frames of `win_ms` every `hop_ms`; each frame is zero-padded to the next
/// power of two. Returns `[frames, nfft/2 + 1]`.
pub fn power_spectrogram(clip: &AudioClip, win_ms: u32, hop_ms: u32) -> Result<Tensor> {
    let win = samples_for_ms(clip.sample_rate, win_ms);
    let hop = samples_for_ms(clip.sample_rate, hop_ms);
    if win == 0 || hop == 0 {
        return Err(Error::InvalidInput("window and hop must be positive".into()));
    }
    if clip.samples.len() < win {
        return Err(Error::InvalidInput(format!(
            "clip of {} samples is shorter than one {win}-sample frame",
            clip.samples.len()
        )));
    }
    let nfft = win.next_power_of_two();
    let n_bins = nfft / 2 + 1;
    let frames = 1 + (clip.samples.len() - win) / hop;

    // periodic Hann window
    let window: Vec<f64> = (0..win)
        .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / win as f64).cos()))
        .collect();

    let mut out = Tensor::zeros(&[frames, n_bins]);
    let mut re = vec![0.0f64; nfft];
    let mut im = vec![0.0f64; nfft];
    for frame in 0..frames {
        let start = frame * hop;
        for i in 0..nfft {
            re[i] = if i < win {
                clip.samples[start + i] * window[i]
            } else {
                0.0
            };
            im[i] = 0.0;
        }
        fft_in_place(&mut re, &mut im);
        for k in 0..n_bins {
            *out.at_mut(&[frame, k]) = re[k] * re[k] + im[k] * im[k];
        }
    }
    Ok(out)
}

/// Log mel-band energies per non-overlapping 500 ms segment.
///
/// For every full segment: mean power per FFT bin over the segment's frames,
/// projected onto the filterbank, then `log(x + 1e-10)`. Trailing audio
/// shorter than a segment is ignored.
pub fn log_mel_segments(
    clip: &AudioClip,
    filterbank: &MelFilterbank,
    song_id: &str,
) -> Result<FeatureSequence> {
    if clip.samples.is_empty() {
        return Err(Error::InvalidInput("empty clip".into()));
    }
    if filterbank.sample_rate != clip.sample_rate || filterbank.n_fft != stft_nfft(clip.sample_rate)
    {
        return Err(Error::dimension(
            "filterbank/clip mismatch",
            &[filterbank.sample_rate as usize, filterbank.n_fft],
            &[clip.sample_rate as usize, stft_nfft(clip.sample_rate)],
        ));
    }
    let seg_len = samples_for_ms(clip.sample_rate, SEGMENT_MS);
    let n_segments = clip.samples.len() / seg_len;
    if n_segments == 0 {
        return Err(Error::InvalidInput(format!(
            "clip of {:.0} ms is shorter than one {SEGMENT_MS} ms segment",
            clip.duration_ms()
        )));
    }

    let n_mels = filterbank.n_mels;
    let mut features = Tensor::zeros(&[n_segments, n_mels]);
    for seg in 0..n_segments {
        let sub = AudioClip {
            samples: clip.samples[seg * seg_len..(seg + 1) * seg_len].to_vec(),
            sample_rate: clip.sample_rate,
        };
        let spec = power_spectrogram(&sub, WIN_MS, HOP_MS)?;
        let frames = spec.shape()[0];
        let n_bins = spec.shape()[1];
        let mut mean_power = vec![0.0f64; n_bins];
        for f in 0..frames {
            for k in 0..n_bins {
                mean_power[k] += spec.at(&[f, k]);
            }
        }
        for p in &mut mean_power {
            *p /= frames as f64;
        }
        for (m, band) in filterbank.apply(&mean_power).into_iter().enumerate() {
            *features.at_mut(&[seg, m]) = (band + LOG_EPS).ln();
        }
    }
    Ok(FeatureSequence {
        song_id: song_id.to_string(),
        times_ms: (0..n_segments as u32).map(|s| s * SEGMENT_MS).collect(),
        features,
    })
}

/// Filterbank matching this crate's spectrogram settings for a sample rate:
/// `n_mels` triangles from 0 Hz to Nyquist.
pub fn default_filterbank(n_mels: usize, sample_rate: u32) -> Result<MelFilterbank> {
    MelFilterbank::new(
        n_mels,
        0.0,
        sample_rate as f64 / 2.0,
        sample_rate,
        stft_nfft(sample_rate),
    )
}
