//! `mer sweep`: one training run per (sequence length, seed), aggregated
//! into a mean +/- std grid per sequence length.
//!
//! Development columns evaluate the model on the full training dataset;
//! evaluation columns appear when a held-out evaluation dataset is given.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use mer_core::dataset::{load_dataset, SongPair};
use mer_core::error::{Error, Result};
use mer_core::evaluation::{evaluate_songs, multi_run, EvalMode, MultiRunSummary};
use mer_core::model::Model;
use mer_core::training::{train, TrainConfig};

use crate::config::{prepare_output, require_dir};
use crate::SweepArgs;

struct RowBlock {
    summary: MultiRunSummary,
}

impl RowBlock {
    fn cells(&self) -> Vec<String> {
        let std = self.summary.std.as_ref();
        let fmt_std = |v: Option<f64>| v.map(|s| format!("{s:.16e}")).unwrap_or_default();
        vec![
            format!("{:.16e}", self.summary.mean.valence),
            fmt_std(std.map(|s| s.valence)),
            format!("{:.16e}", self.summary.mean.arousal),
            fmt_std(std.map(|s| s.arousal)),
            format!("{:.16e}", self.summary.mean.average),
            fmt_std(std.map(|s| s.average)),
        ]
    }

    fn pretty(&self) -> String {
        let m = &self.summary.mean;
        match &self.summary.std {
            Some(s) => format!(
                "{:.3}±{:.3}  {:.3}±{:.3}  {:.3}±{:.3}",
                m.valence, s.valence, m.arousal, s.arousal, m.average, s.average
            ),
            None => format!("{:.3}  {:.3}  {:.3}", m.valence, m.arousal, m.average),
        }
    }
}

pub fn run(args: SweepArgs) -> Result<()> {
    let mut setup = super::resolve_common(&args.common)?;
    let out = setup
        .file
        .resolve_path(&args.out, "out")?
        .ok_or_else(|| Error::Config("out is required".into()))?;
    let seq_lens = setup
        .file
        .resolve_list(&args.seq_lens, "seq_lens")?
        .unwrap_or_else(|| vec![10, 20, 30, 60]);
    let seeds = setup
        .file
        .resolve_list(&args.seeds, "seeds")?
        .unwrap_or_else(|| vec![1, 2, 3, 4, 5]);
    if seq_lens.is_empty() || seeds.is_empty() {
        return Err(Error::Config("seq_lens and seeds must be non-empty".into()));
    }
    let eval_features = setup
        .file
        .resolve_path(&args.eval_features_dir, "eval_features_dir")?;
    let eval_annotations = setup
        .file
        .resolve_path(&args.eval_annotations_dir, "eval_annotations_dir")?;
    let eval_dirs = match (eval_features, eval_annotations) {
        (Some(f), Some(a)) => {
            require_dir(&f, "evaluation features")?;
            require_dir(&a, "evaluation annotations")?;
            Some((f, a))
        }
        (None, None) => None,
        _ => {
            return Err(Error::Config(
                "eval_features_dir and eval_annotations_dir must be given together".into(),
            ))
        }
    };

    setup.resolved.put("out", out.display());
    setup.resolved.put(
        "seq_lens",
        seq_lens.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
    );
    setup.resolved.put(
        "seeds",
        seeds.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
    );
    if let Some((f, a)) = &eval_dirs {
        setup.resolved.put("eval_features_dir", f.display());
        setup.resolved.put("eval_annotations_dir", a.display());
    }
    let provenance = setup.resolved.provenance();

    let dev_pairs = load_dataset(&setup.features_dir, &setup.annotations_dir)?;
    if dev_pairs.is_empty() {
        return Err(Error::Ingestion(format!(
            "no songs under {}",
            setup.features_dir.display()
        )));
    }
    let feature_dim = setup.checked_feature_dim(dev_pairs[0].0.feature_dim())?;
    let spec = setup.spec(feature_dim);
    let eval_pairs: Option<Vec<SongPair>> = match &eval_dirs {
        Some((f, a)) => {
            let pairs = load_dataset(f, a)?;
            if pairs.is_empty() {
                return Err(Error::Ingestion(format!("no songs under {}", f.display())));
            }
            if pairs[0].0.feature_dim() != feature_dim {
                return Err(Error::dimension(
                    "evaluation feature_dim vs development",
                    &[pairs[0].0.feature_dim()],
                    &[feature_dim],
                ));
            }
            Some(pairs)
        }
        None => None,
    };

    let mut rows: Vec<(usize, RowBlock, Option<RowBlock>)> = Vec::new();
    for &seq_len in &seq_lens {
        let cfg = TrainConfig {
            seq_len,
            ..setup.train.clone()
        };
        // one trained model per seed, reused for both summaries
        let trained: RefCell<BTreeMap<u64, Model>> = RefCell::new(BTreeMap::new());
        let dev_summary = multi_run(
            |seed| {
                eprintln!("sweep: seq_len {seq_len} seed {seed}");
                let run_cfg = TrainConfig { seed, ..cfg.clone() };
                let (model, report) = train(&spec, &dev_pairs, &run_cfg)?;
                eprintln!(
                    "sweep: seq_len {seq_len} seed {seed}: best epoch {} ({} epochs run)",
                    report.best_epoch,
                    report.epochs.len()
                );
                let result = evaluate_songs(&model, &dev_pairs, seq_len, EvalMode::Pooled)?;
                trained.borrow_mut().insert(seed, model);
                Ok(result)
            },
            &seeds,
        )?;
        let eval_summary = match &eval_pairs {
            Some(pairs) => Some(RowBlock {
                summary: multi_run(
                    |seed| {
                        let model = trained.borrow()[&seed].clone();
                        evaluate_songs(&model, pairs, seq_len, EvalMode::Pooled)
                    },
                    &seeds,
                )?,
            }),
            None => None,
        };
        rows.push((seq_len, RowBlock { summary: dev_summary }, eval_summary));
    }

    // CSV table
    let mut csv = String::new();
    let _ = writeln!(csv, "# {provenance}");
    let mut header = vec!["seq_len".to_string(), "n_runs".to_string()];
    if eval_pairs.is_some() {
        for col in ["valence", "arousal", "average"] {
            header.push(format!("eval_{col}_mean"));
            header.push(format!("eval_{col}_std"));
        }
    }
    for col in ["valence", "arousal", "average"] {
        header.push(format!("dev_{col}_mean"));
        header.push(format!("dev_{col}_std"));
    }
    let _ = writeln!(csv, "{}", header.join(","));
    for (seq_len, dev, eval) in &rows {
        let mut cells = vec![seq_len.to_string(), seeds.len().to_string()];
        if let Some(e) = eval {
            cells.extend(e.cells());
        }
        cells.extend(dev.cells());
        let _ = writeln!(csv, "{}", cells.join(","));
    }
    prepare_output(&out)?;
    std::fs::write(&out, &csv)?;

    // human-readable table
    println!("runs per cell: {}  (seeds {:?})", seeds.len(), seeds);
    println!("columns: valence  arousal  average (RMSE)");
    for (seq_len, dev, eval) in &rows {
        match eval {
            Some(e) => println!(
                "seq_len {seq_len:>3}  evaluation: {}   development: {}",
                e.pretty(),
                dev.pretty()
            ),
            None => println!("seq_len {seq_len:>3}  development: {}", dev.pretty()),
        }
    }
    println!("table: {}", out.display());
    Ok(())
}
