//! Synthetic dataset generator for tests and fixtures.
//!
//! Features are i.i.d. Uniform(-1, 1). Targets are a smooth bounded
//! functional of an exponential moving average of the features, so a
//! correctly wired network can learn them while every value stays strictly
//! inside [-1, 1]:
//!
//! ```text
//! s_t = mean_f x[t, f]                       (flat projection)
//! p_t = mean_f sign_f * x[t, f]              (alternating projection,
//!                                             sign_f = +1 for even f, -1 odd)
//! m_t = 0.3 * m_{t-1} + 0.7 * s_t,  m_{-1} = 0
//! n_t = 0.3 * n_{t-1} + 0.7 * p_t,  n_{-1} = 0
//! alpha = sqrt(3 F / 0.53846...)             (unit steady-state variance)
//!
//! smooth:  valence_t = tanh(alpha * m_t),        arousal_t = tanh(alpha * n_t)
//! echo:    valence_t = tanh(alpha * m_{t-3}),    arousal_t = tanh(alpha * n_{t-3})
//!          (terms with negative index are zero)
//! ```
//!
//! The `echo` variant forces temporal memory: targets answer to inputs three
//! steps in the past.

use super::{AnnotationSequence, FeatureSequence, SongPair};
use crate::numerics::{Rng, Tensor};

/// Target functional of the synthetic set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Difficulty {
    /// Targets respond to the current smoothed input.
    Smooth,
    /// Targets respond to the smoothed input three steps back.
    Echo,
}

const EMA_DECAY: f64 = 0.3;
const ECHO_LAG: usize = 3;

/// Generates `n_songs` aligned pairs with `t_len` segments of `f_dim`
/// features each. Identical seeds give identical datasets.
pub fn make_synthetic(
    rng: &mut Rng,
    n_songs: usize,
    t_len: usize,
    f_dim: usize,
    difficulty: Difficulty,
) -> Vec<SongPair> {
    assert!(n_songs >= 1 && t_len >= 1 && f_dim >= 1);
    // steady-state variance of the EMA of a mean of f_dim Uniform(-1,1) draws:
    // (1-lambda)^2 / (1-lambda^2) * 1/(3 F)
    let ema_var =
        (1.0 - EMA_DECAY) * (1.0 - EMA_DECAY) / (1.0 - EMA_DECAY * EMA_DECAY) / (3.0 * f_dim as f64);
    let alpha = 1.0 / ema_var.sqrt();

    let mut pairs = Vec::with_capacity(n_songs);
    for song in 0..n_songs {
        let song_id = format!("synth{song:04}");
        let mut features = Tensor::zeros(&[t_len, f_dim]);
        for v in features.data_mut() {
            *v = rng.uniform(-1.0, 1.0);
        }

        let mut m = Vec::with_capacity(t_len);
        let mut n = Vec::with_capacity(t_len);
        let (mut m_prev, mut n_prev) = (0.0, 0.0);
        for t in 0..t_len {
            let mut s = 0.0;
            let mut p = 0.0;
            for f in 0..f_dim {
                let x = features.at(&[t, f]);
                s += x;
                p += if f % 2 == 0 { x } else { -x };
            }
            s /= f_dim as f64;
            p /= f_dim as f64;
            m_prev = EMA_DECAY * m_prev + (1.0 - EMA_DECAY) * s;
            n_prev = EMA_DECAY * n_prev + (1.0 - EMA_DECAY) * p;
            m.push(m_prev);
            n.push(n_prev);
        }

        let pick = |series: &[f64], t: usize| -> f64 {
            match difficulty {
                Difficulty::Smooth => series[t],
                Difficulty::Echo => {
                    if t >= ECHO_LAG {
                        series[t - ECHO_LAG]
                    } else {
                        0.0
                    }
                }
            }
        };
        let valence: Vec<f64> = (0..t_len).map(|t| (alpha * pick(&m, t)).tanh()).collect();
        let arousal: Vec<f64> = (0..t_len).map(|t| (alpha * pick(&n, t)).tanh()).collect();
        let times: Vec<u32> = (0..t_len as u32).map(|t| t * super::ANNOTATION_STEP_MS).collect();

        pairs.push((
            FeatureSequence {
                song_id: song_id.clone(),
                times_ms: times.clone(),
                features,
            },
            AnnotationSequence {
                song_id,
                times_ms: times,
                valence: Tensor::new(&[t_len], valence),
                arousal: Tensor::new(&[t_len], arousal),
            },
        ));
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_dataset() {
        let a = make_synthetic(&mut Rng::new(4), 3, 20, 5, Difficulty::Smooth);
        let b = make_synthetic(&mut Rng::new(4), 3, 20, 5, Difficulty::Smooth);
        assert_eq!(a, b);
    }

    #[test]
    fn targets_stay_in_range() {
        let pairs = make_synthetic(&mut Rng::new(11), 10, 100, 10, Difficulty::Smooth);
        let mut checked = 0;
        for (_, ann) in &pairs {
            for v in ann.valence.data().iter().chain(ann.arousal.data()) {
                assert!((-1.0..=1.0).contains(v));
                checked += 1;
            }
        }
        assert!(checked >= 1000);
        let pairs = make_synthetic(&mut Rng::new(12), 10, 500, 10, Difficulty::Echo);
        for (_, ann) in &pairs {
            for v in ann.valence.data().iter().chain(ann.arousal.data()) {
                assert!((-1.0..=1.0).contains(v));
                checked += 1;
            }
        }
        assert!(checked >= 10_000);
    }

    #[test]
    fn echo_targets_lag_the_smooth_ones() {
        // same rng stream -> same features; echo targets are shifted copies
        let smooth = make_synthetic(&mut Rng::new(9), 1, 30, 4, Difficulty::Smooth);
        let echo = make_synthetic(&mut Rng::new(9), 1, 30, 4, Difficulty::Echo);
        let (sv, ev) = (&smooth[0].1.valence, &echo[0].1.valence);
        for t in 3..30 {
            assert_eq!(ev.at(&[t]), sv.at(&[t - 3]));
        }
        for t in 0..3 {
            assert_eq!(ev.at(&[t]), 0.0);
        }
    }

    // Ordinary least squares on (current features -> valence) via normal
    // equations, solved with Gaussian elimination. Independent of all
    // production code paths.
    fn least_squares_rmse(pairs: &[SongPair]) -> f64 {
        let f_dim = pairs[0].0.feature_dim();
        let d = f_dim + 1; // intercept
        let mut xtx = vec![vec![0.0f64; d]; d];
        let mut xty = vec![0.0f64; d];
        let mut rows = Vec::new();
        for (feat, ann) in pairs {
            for t in 0..feat.len() {
                let mut row = vec![1.0];
                for f in 0..f_dim {
                    row.push(feat.features.at(&[t, f]));
                }
                let y = ann.valence.at(&[t]);
                for i in 0..d {
                    for j in 0..d {
                        xtx[i][j] += row[i] * row[j];
                    }
                    xty[i] += row[i] * y;
                }
                rows.push((row, y));
            }
        }
        // ridge-free Gaussian elimination with partial pivoting
        let mut a = xtx;
        let mut b = xty;
        for col in 0..d {
            let piv = (col..d)
                .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
                .unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            let diag = a[col][col];
            for r in (col + 1)..d {
                let factor = a[r][col] / diag;
                for c in col..d {
                    a[r][c] -= factor * a[col][c];
                }
                b[r] -= factor * b[col];
            }
        }
        let mut w = vec![0.0; d];
        for r in (0..d).rev() {
            let mut acc = b[r];
            for c in (r + 1)..d {
                acc -= a[r][c] * w[c];
            }
            w[r] = acc / a[r][r];
        }
        let mut sq = 0.0;
        for (row, y) in &rows {
            let pred: f64 = row.iter().zip(w.iter()).map(|(x, w)| x * w).sum();
            sq += (pred - y) * (pred - y);
        }
        (sq / rows.len() as f64).sqrt()
    }

    #[test]
    fn linear_regression_beats_predicting_zero() {
        let pairs = make_synthetic(&mut Rng::new(31), 8, 60, 6, Difficulty::Smooth);
        let ls = least_squares_rmse(&pairs);
        let mut sq = 0.0;
        let mut count = 0;
        for (_, ann) in &pairs {
            for v in ann.valence.data() {
                sq += v * v;
                count += 1;
            }
        }
        let zero_rmse = (sq / count as f64).sqrt();
        assert!(
            ls < 0.95 * zero_rmse,
            "least squares {ls} should beat zero predictor {zero_rmse}"
        );
    }
}
