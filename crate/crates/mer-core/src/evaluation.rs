//! RMSE metrics, full-song evaluation and multi-run aggregation.

use crate::dataset::{slice_sequences, stack_windows, AnnotationSequence, FeatureSequence, SongPair};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::numerics::Tensor;

/// Root-mean-square error between two equal-length vectors.
pub fn rmse(pred: &Tensor, reference: &Tensor) -> Result<f64> {
    if pred.numel() == 0 {
        return Err(Error::InvalidInput("rmse of empty input".into()));
    }
    if pred.shape() != reference.shape() {
        return Err(Error::dimension("rmse", pred.shape(), reference.shape()));
    }
    let sq: f64 = pred
        .data()
        .iter()
        .zip(reference.data().iter())
        .map(|(&p, &r)| (p - r) * (p - r))
        .sum();
    Ok((sq / pred.numel() as f64).sqrt())
}

/// How per-song errors combine into the reported number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// One RMSE over every segment of every song (the default).
    Pooled,
    /// Per-song RMSE, averaged over songs.
    PerSongMean,
}

/// Evaluation outcome for one dataset.
#[derive(Debug, Clone)]
pub struct EvalResult {
    pub rmse_valence: f64,
    pub rmse_arousal: f64,
    pub rmse_average: f64,
    /// song id -> (valence rmse, arousal rmse), sorted by id
    pub per_song: Vec<(String, f64, f64)>,
    pub pooled: bool,
}

/// Runs the model over one song, windowed at `seq_len` with a padded and
/// masked final window, and returns per-segment predictions (clamped to
/// [-1, 1] by inference mode) under the annotation schema.
pub fn predict_song(
    model: &Model,
    features: &FeatureSequence,
    seq_len: usize,
) -> Result<AnnotationSequence> {
    if features.is_empty() {
        return Err(Error::InvalidInput(format!(
            "song {} has no segments",
            features.song_id
        )));
    }
    let t_total = features.len();
    // pair features with dummy annotations so the shared slicer applies
    let dummy = AnnotationSequence {
        song_id: features.song_id.clone(),
        times_ms: features.times_ms.clone(),
        valence: Tensor::zeros(&[t_total]),
        arousal: Tensor::zeros(&[t_total]),
    };
    let pairs = vec![(features.clone(), dummy)];
    let windows = slice_sequences(&pairs, seq_len, true);
    let batch = stack_windows(&windows.iter().collect::<Vec<_>>());
    let pred = model.forward_infer(&batch.inputs)?;

    let mut valence = Vec::with_capacity(t_total);
    let mut arousal = Vec::with_capacity(t_total);
    let b = batch.inputs.shape()[0];
    let l = batch.inputs.shape()[1];
    for bi in 0..b {
        for t in 0..l {
            if batch.mask.at(&[bi, t]) == 1.0 {
                valence.push(pred.at(&[bi, t, 0]));
                arousal.push(pred.at(&[bi, t, 1]));
            }
        }
    }
    debug_assert_eq!(valence.len(), t_total);
    Ok(AnnotationSequence {
        song_id: features.song_id.clone(),
        times_ms: features.times_ms.clone(),
        valence: Tensor::new(&[t_total], valence),
        arousal: Tensor::new(&[t_total], arousal),
    })
}

/// Evaluates a model over full songs. Every song is windowed at `seq_len`
/// (final remainder padded and masked), predictions are concatenated with
/// padding dropped, and errors combine per `mode`.
pub fn evaluate_songs(
    model: &Model,
    pairs: &[SongPair],
    seq_len: usize,
    mode: EvalMode,
) -> Result<EvalResult> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("evaluate_songs on empty dataset".into()));
    }
    let mut per_song = Vec::new();
    let mut pooled_sq = [0.0f64; 2];
    let mut pooled_n = 0usize;
    for (feat, ann) in pairs {
        let pred = predict_song(model, feat, seq_len)?;
        let rv = rmse(&pred.valence, &ann.valence)?;
        let ra = rmse(&pred.arousal, &ann.arousal)?;
        per_song.push((feat.song_id.clone(), rv, ra));
        for t in 0..feat.len() {
            let dv = pred.valence.at(&[t]) - ann.valence.at(&[t]);
            let da = pred.arousal.at(&[t]) - ann.arousal.at(&[t]);
            pooled_sq[0] += dv * dv;
            pooled_sq[1] += da * da;
        }
        pooled_n += feat.len();
    }
    per_song.sort_by(|a, b| a.0.cmp(&b.0));

    let (rmse_valence, rmse_arousal) = match mode {
        EvalMode::Pooled => (
            (pooled_sq[0] / pooled_n as f64).sqrt(),
            (pooled_sq[1] / pooled_n as f64).sqrt(),
        ),
        EvalMode::PerSongMean => {
            let n = per_song.len() as f64;
            (
                per_song.iter().map(|(_, v, _)| v).sum::<f64>() / n,
                per_song.iter().map(|(_, _, a)| a).sum::<f64>() / n,
            )
        }
    };
    Ok(EvalResult {
        rmse_valence,
        rmse_arousal,
        rmse_average: 0.5 * (rmse_valence + rmse_arousal),
        per_song,
        pooled: mode == EvalMode::Pooled,
    })
}

/// One metric triple aggregated over runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricStats {
    pub valence: f64,
    pub arousal: f64,
    pub average: f64,
}

/// Mean and sample standard deviation of the evaluation metrics over
/// several seeded runs.
#[derive(Debug, Clone)]
pub struct MultiRunSummary {
    pub seeds: Vec<u64>,
    pub results: Vec<EvalResult>,
    pub mean: MetricStats,
    /// `None` with fewer than two runs.
    pub std: Option<MetricStats>,
}

fn sample_mean_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}

/// Trains/evaluates once per seed via the supplied closure and aggregates.
/// A failure part-way reports which seeds had already completed.
pub fn multi_run(
    mut run: impl FnMut(u64) -> Result<EvalResult>,
    seeds: &[u64],
) -> Result<MultiRunSummary> {
    if seeds.is_empty() {
        return Err(Error::InvalidInput("multi_run needs at least one seed".into()));
    }
    let mut results = Vec::with_capacity(seeds.len());
    let mut completed = Vec::new();
    for &seed in seeds {
        match run(seed) {
            Ok(result) => {
                results.push(result);
                completed.push(seed);
            }
            Err(e) => {
                return Err(Error::PartialRuns {
                    completed,
                    source: Box::new(e),
                });
            }
        }
    }
    let valences: Vec<f64> = results.iter().map(|r| r.rmse_valence).collect();
    let arousals: Vec<f64> = results.iter().map(|r| r.rmse_arousal).collect();
    let averages: Vec<f64> = results.iter().map(|r| r.rmse_average).collect();
    let (mv, sv) = sample_mean_std(&valences);
    let (ma, sa) = sample_mean_std(&arousals);
    let (mavg, savg) = sample_mean_std(&averages);
    Ok(MultiRunSummary {
        seeds: seeds.to_vec(),
        results,
        mean: MetricStats {
            valence: mv,
            arousal: ma,
            average: mavg,
        },
        std: match (sv, sa, savg) {
            (Some(v), Some(a), Some(g)) => Some(MetricStats {
                valence: v,
                arousal: a,
                average: g,
            }),
            _ => None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{make_synthetic, Difficulty};
    use crate::model::ModelSpec;
    use crate::numerics::{uniform_init, Rng};

    #[test]
    fn rmse_of_identical_vectors_is_zero() {
        let v = Tensor::new(&[3], vec![0.4, -0.2, 0.9]);
        assert_eq!(rmse(&v, &v).unwrap(), 0.0);
    }

    #[test]
    fn rmse_known_value() {
        let pred = Tensor::new(&[3], vec![0.5, 0.2, -0.1]);
        let reference = Tensor::new(&[3], vec![0.4, 0.0, 0.1]);
        let got = rmse(&pred, &reference).unwrap();
        assert!((got - 0.03f64.sqrt()).abs() < 1e-9, "{got}");
    }

    #[test]
    fn rmse_rejects_empty() {
        let empty = Tensor::zeros(&[0]);
        assert!(rmse(&empty, &empty).is_err());
    }

    #[test]
    fn rmse_symmetry_and_homogeneity() {
        let mut rng = Rng::new(2);
        for _ in 0..20 {
            let a = uniform_init(&mut rng, &[17], 1.0);
            let b = uniform_init(&mut rng, &[17], 1.0);
            assert_eq!(rmse(&a, &b).unwrap(), rmse(&b, &a).unwrap());
            let alpha = rng.uniform(-3.0, 3.0);
            let lhs = rmse(&a.scale(alpha), &b.scale(alpha)).unwrap();
            let rhs = alpha.abs() * rmse(&a, &b).unwrap();
            assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs));
        }
    }

    #[test]
    fn rmse_invariant_under_common_permutation() {
        let mut rng = Rng::new(3);
        let a = uniform_init(&mut rng, &[11], 1.0);
        let b = uniform_init(&mut rng, &[11], 1.0);
        let base = rmse(&a, &b).unwrap();
        let mut idx: Vec<usize> = (0..11).collect();
        rng.shuffle(&mut idx);
        let pa = Tensor::new(&[11], idx.iter().map(|&i| a.data()[i]).collect());
        let pb = Tensor::new(&[11], idx.iter().map(|&i| b.data()[i]).collect());
        assert!((rmse(&pa, &pb).unwrap() - base).abs() < 1e-15);
    }

    fn tiny_model(f: usize) -> Model {
        let mut spec = ModelSpec::new(f);
        spec.cnn_filters = 2;
        spec.fc_units = 2;
        spec.gru_units = 2;
        Model::build(spec, &mut Rng::new(1)).unwrap()
    }

    #[test]
    fn constant_zero_predictor_on_half_targets() {
        // a fresh model with zeroed heads predicts 0 everywhere
        let mut model = tiny_model(3);
        let names: Vec<String> = model.params().names().cloned().collect();
        for name in names {
            if name.contains("maxout") {
                for v in model.params_mut().get_mut(&name).data_mut() {
                    *v = 0.0;
                }
            }
        }
        let mut pairs = make_synthetic(&mut Rng::new(5), 3, 20, 3, Difficulty::Smooth);
        for (_, ann) in &mut pairs {
            for v in ann.valence.data_mut() {
                *v = 0.5;
            }
            for v in ann.arousal.data_mut() {
                *v = 0.5;
            }
        }
        let result = evaluate_songs(&model, &pairs, 10, EvalMode::Pooled).unwrap();
        assert!((result.rmse_valence - 0.5).abs() < 1e-12);
        assert!((result.rmse_arousal - 0.5).abs() < 1e-12);
        assert!((result.rmse_average - 0.5).abs() < 1e-12);
    }

    #[test]
    fn perfect_oracle_scores_zero() {
        // ground-truth annotations as predictions: evaluate a model against
        // its own outputs
        let model = tiny_model(4);
        let pairs = make_synthetic(&mut Rng::new(6), 2, 20, 4, Difficulty::Smooth);
        let mut oracle_pairs = Vec::new();
        for (feat, _) in &pairs {
            let pred = predict_song(&model, feat, 10).unwrap();
            oracle_pairs.push((feat.clone(), pred));
        }
        let result = evaluate_songs(&model, &oracle_pairs, 10, EvalMode::Pooled).unwrap();
        assert_eq!(result.rmse_valence, 0.0);
        assert_eq!(result.rmse_arousal, 0.0);
    }

    #[test]
    fn pooled_rmse_matches_concatenation_oracle() {
        let model = tiny_model(4);
        let pairs = make_synthetic(&mut Rng::new(7), 3, 25, 4, Difficulty::Smooth);
        let result = evaluate_songs(&model, &pairs, 10, EvalMode::Pooled).unwrap();

        // manual concatenation, then the plain formula
        let mut pred_all = Vec::new();
        let mut ref_all = Vec::new();
        for (feat, ann) in &pairs {
            let p = predict_song(&model, feat, 10).unwrap();
            pred_all.extend_from_slice(p.valence.data());
            ref_all.extend_from_slice(ann.valence.data());
        }
        let n = pred_all.len();
        let want = rmse(
            &Tensor::new(&[n], pred_all),
            &Tensor::new(&[n], ref_all),
        )
        .unwrap();
        assert!((result.rmse_valence - want).abs() < 1e-12);
    }

    #[test]
    fn pooled_mode_is_order_invariant() {
        let model = tiny_model(4);
        let mut pairs = make_synthetic(&mut Rng::new(8), 4, 20, 4, Difficulty::Smooth);
        let forward = evaluate_songs(&model, &pairs, 10, EvalMode::Pooled).unwrap();
        pairs.reverse();
        let backward = evaluate_songs(&model, &pairs, 10, EvalMode::Pooled).unwrap();
        assert_eq!(forward.rmse_valence, backward.rmse_valence);
        assert_eq!(forward.rmse_arousal, backward.rmse_arousal);
    }

    #[test]
    fn multi_run_identical_seeds_zero_std() {
        let summary = multi_run(
            |_| {
                Ok(EvalResult {
                    rmse_valence: 0.3,
                    rmse_arousal: 0.2,
                    rmse_average: 0.25,
                    per_song: vec![],
                    pooled: true,
                })
            },
            &[5, 5, 5],
        )
        .unwrap();
        assert_eq!(summary.mean.valence, 0.3);
        assert_eq!(summary.std.unwrap().valence, 0.0);
    }

    #[test]
    fn multi_run_mean_and_std_match_two_pass_oracle() {
        let values = [(0.30, 0.20), (0.26, 0.24), (0.33, 0.21), (0.29, 0.26), (0.31, 0.19)];
        let summary = multi_run(
            |seed| {
                let (v, a) = values[seed as usize];
                Ok(EvalResult {
                    rmse_valence: v,
                    rmse_arousal: a,
                    rmse_average: 0.5 * (v + a),
                    per_song: vec![],
                    pooled: true,
                })
            },
            &[0, 1, 2, 3, 4],
        )
        .unwrap();
        // two-pass variance oracle
        let vs: Vec<f64> = values.iter().map(|(v, _)| *v).collect();
        let mean = vs.iter().sum::<f64>() / 5.0;
        let var = vs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
        assert!((summary.mean.valence - mean).abs() < 1e-12);
        assert!((summary.std.unwrap().valence - var.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn multi_run_two_seeds_mean() {
        let summary = multi_run(
            |seed| {
                let v = if seed == 1 { 0.2 } else { 0.4 };
                Ok(EvalResult {
                    rmse_valence: v,
                    rmse_arousal: v,
                    rmse_average: v,
                    per_song: vec![],
                    pooled: true,
                })
            },
            &[1, 2],
        )
        .unwrap();
        assert!((summary.mean.average - 0.3).abs() < 1e-15);
    }

    #[test]
    fn multi_run_failure_lists_completed_seeds() {
        let err = multi_run(
            |seed| {
                if seed == 3 {
                    Err(Error::Numerical("boom".into()))
                } else {
                    Ok(EvalResult {
                        rmse_valence: 0.1,
                        rmse_arousal: 0.1,
                        rmse_average: 0.1,
                        per_song: vec![],
                        pooled: true,
                    })
                }
            },
            &[1, 2, 3, 4],
        )
        .unwrap_err();
        match err {
            Error::PartialRuns { completed, .. } => assert_eq!(completed, vec![1, 2]),
            other => panic!("wrong error {other}"),
        }
    }

    #[test]
    fn padding_does_not_contribute() {
        // evaluating at a window length that forces padding must equal the
        // padding-free full-length evaluation
        let model = tiny_model(4);
        let pairs = make_synthetic(&mut Rng::new(9), 2, 20, 4, Difficulty::Smooth);
        let padded = evaluate_songs(&model, &pairs, 7, EvalMode::Pooled).unwrap(); // 20 = 2*7 + 6
        let mut manual_sq = 0.0;
        let mut n = 0;
        for (feat, ann) in &pairs {
            let pred = predict_song(&model, feat, 7).unwrap();
            for t in 0..feat.len() {
                let d = pred.valence.at(&[t]) - ann.valence.at(&[t]);
                manual_sq += d * d;
                n += 1;
            }
        }
        assert!((padded.rmse_valence - (manual_sq / n as f64).sqrt()).abs() < 1e-12);
    }
}
