//! Shared fixtures for the pipeline benchmarks.

use mer_core::dataset::{make_synthetic, slice_sequences, stack_windows, Batch, SongPair};
use mer_core::model::{Model, ModelSpec};
use mer_core::numerics::Rng;

/// Mel-sized model: 64 input bands, default widths.
pub fn mel_model() -> Model {
    Model::build(ModelSpec::new(64), &mut Rng::new(1)).expect("valid spec")
}

/// One stacked batch of `b` windows of length `l` over `f` features.
pub fn synthetic_batch(b: usize, l: usize, f: usize) -> Batch {
    let pairs: Vec<SongPair> = make_synthetic(
        &mut Rng::new(9),
        b,
        l,
        f,
        mer_core::dataset::Difficulty::Smooth,
    );
    let windows = slice_sequences(&pairs, l, false);
    stack_windows(&windows.iter().collect::<Vec<_>>())
}
