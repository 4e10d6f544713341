//! Per-song feature/annotation sequences, CSV ingestion, synthetic fixtures,
//! and the slicing of songs into fixed-length training windows and
//! mini-batches.

mod csv;
mod synthetic;

pub use csv::{
    load_dataset, parse_annotation_csv, parse_feature_csv, write_annotation_csv,
    write_feature_csv, ANNOTATION_STEP_MS,
};
pub use synthetic::{make_synthetic, Difficulty};

use crate::error::{Error, Result};
use crate::numerics::{fnv1a64, mix64, Rng, Tensor};

/// One song's feature time series: one vector per 500 ms segment.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub song_id: String,
    pub times_ms: Vec<u32>,
    /// `[T, F]`
    pub features: Tensor,
}

impl FeatureSequence {
    pub fn len(&self) -> usize {
        self.times_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_ms.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.shape()[1]
    }
}

/// One song's (valence, arousal) annotation time series, aligned 1:1 with
/// its [`FeatureSequence`]. All values lie in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSequence {
    pub song_id: String,
    pub times_ms: Vec<u32>,
    /// `[T]`
    pub valence: Tensor,
    /// `[T]`
    pub arousal: Tensor,
}

impl AnnotationSequence {
    pub fn len(&self) -> usize {
        self.times_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_ms.is_empty()
    }
}

/// Aligned features and annotations of one song.
pub type SongPair = (FeatureSequence, AnnotationSequence);

/// One fixed-length training/evaluation window cut from a song.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub song_id: String,
    /// `[L, F]`
    pub inputs: Tensor,
    /// `[L, 2]`, channel 0 valence, channel 1 arousal
    pub targets: Tensor,
    /// `[L]` of {0, 1}; zero marks padding
    pub mask: Tensor,
}

/// A stacked mini-batch of windows.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// `[B, L, F]`
    pub inputs: Tensor,
    /// `[B, L, 2]`
    pub targets: Tensor,
    /// `[B, L]` of {0, 1}
    pub mask: Tensor,
}

/// Cuts each song into `floor(T / L)` non-overlapping windows of length `L`.
///
/// In evaluation mode a remainder shorter than `L` becomes one final
/// zero-padded window whose mask marks the real positions; in training mode
/// the remainder is discarded.
pub fn slice_sequences(pairs: &[SongPair], seq_len: usize, eval_mode: bool) -> Vec<Window> {
    assert!(seq_len >= 1, "sequence length must be >= 1");
    let mut windows = Vec::new();
    for (feat, ann) in pairs {
        let t_total = feat.len();
        debug_assert_eq!(t_total, ann.len(), "unaligned pair {}", feat.song_id);
        let f_dim = feat.feature_dim();
        let full = t_total / seq_len;
        let mut starts: Vec<(usize, usize)> =
            (0..full).map(|w| (w * seq_len, seq_len)).collect();
        let rem = t_total % seq_len;
        if eval_mode && rem > 0 {
            starts.push((full * seq_len, rem));
        }
        for (start, live) in starts {
            let mut inputs = Tensor::zeros(&[seq_len, f_dim]);
            let mut targets = Tensor::zeros(&[seq_len, 2]);
            let mut mask = Tensor::zeros(&[seq_len]);
            for i in 0..live {
                let t = start + i;
                for f in 0..f_dim {
                    *inputs.at_mut(&[i, f]) = feat.features.at(&[t, f]);
                }
                *targets.at_mut(&[i, 0]) = ann.valence.at(&[t]);
                *targets.at_mut(&[i, 1]) = ann.arousal.at(&[t]);
                *mask.at_mut(&[i]) = 1.0;
            }
            windows.push(Window {
                song_id: feat.song_id.clone(),
                inputs,
                targets,
                mask,
            });
        }
    }
    windows
}

/// Stream of mini-batches over a window set. Each call shuffles once (when
/// asked) and then partitions; the final short batch is emitted.
pub fn batches<'a>(
    windows: &'a [Window],
    batch_size: usize,
    rng: &mut Rng,
    shuffle: bool,
) -> BatchStream<'a> {
    assert!(batch_size >= 1, "batch size must be >= 1");
    let mut order: Vec<usize> = (0..windows.len()).collect();
    if shuffle {
        rng.shuffle(&mut order);
    }
    BatchStream {
        windows,
        order,
        batch_size,
        cursor: 0,
    }
}

pub struct BatchStream<'a> {
    windows: &'a [Window],
    order: Vec<usize>,
    batch_size: usize,
    cursor: usize,
}

impl Iterator for BatchStream<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.cursor >= self.order.len() {
            return None;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let picks = &self.order[self.cursor..end];
        self.cursor = end;
        Some(stack_windows(
            &picks.iter().map(|&i| &self.windows[i]).collect::<Vec<_>>(),
        ))
    }
}

/// Stacks windows of identical length into one batch.
pub fn stack_windows(picks: &[&Window]) -> Batch {
    assert!(!picks.is_empty());
    let l = picks[0].inputs.shape()[0];
    let f = picks[0].inputs.shape()[1];
    let b = picks.len();
    let mut inputs = Tensor::zeros(&[b, l, f]);
    let mut targets = Tensor::zeros(&[b, l, 2]);
    let mut mask = Tensor::zeros(&[b, l]);
    for (bi, w) in picks.iter().enumerate() {
        assert_eq!(w.inputs.shape(), &[l, f], "mixed window shapes in batch");
        let src = w.inputs.data();
        let dst = bi * l * f;
        inputs.data_mut()[dst..dst + l * f].copy_from_slice(src);
        let dst = bi * l * 2;
        targets.data_mut()[dst..dst + l * 2].copy_from_slice(w.targets.data());
        let dst = bi * l;
        mask.data_mut()[dst..dst + l].copy_from_slice(w.mask.data());
    }
    Batch {
        inputs,
        targets,
        mask,
    }
}

/// Deterministic train/validation partition: a song goes to validation when
/// the finalized FNV-1a hash of its id (`mix64(fnv1a64(id))`), scaled to
/// [0, 1), falls below `val_fraction`.
pub fn split_by_hash(pairs: &[SongPair], val_fraction: f64) -> (Vec<SongPair>, Vec<SongPair>) {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for pair in pairs {
        let h = mix64(fnv1a64(pair.0.song_id.as_bytes())) as f64 / 2f64.powi(64);
        if h < val_fraction {
            val.push(pair.clone());
        } else {
            train.push(pair.clone());
        }
    }
    (train, val)
}

/// Checks that the two halves of a pair agree in song id, length and
/// timestamps.
pub fn validate_pair(feat: &FeatureSequence, ann: &AnnotationSequence) -> Result<()> {
    if feat.song_id != ann.song_id {
        return Err(Error::Ingestion(format!(
            "paired ids differ: {} vs {}",
            feat.song_id, ann.song_id
        )));
    }
    if feat.len() != ann.len() {
        return Err(Error::Ingestion(format!(
            "song {}: {} feature segments vs {} annotations",
            feat.song_id,
            feat.len(),
            ann.len()
        )));
    }
    if feat.times_ms != ann.times_ms {
        return Err(Error::Ingestion(format!(
            "song {}: feature and annotation timestamps differ",
            feat.song_id
        )));
    }
    Ok(())
}
