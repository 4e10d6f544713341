//! `mer evaluate`: score a checkpoint against annotated songs.

use std::fmt::Write as _;

use mer_core::dataset::load_dataset;
use mer_core::error::{Error, Result};
use mer_core::evaluation::{evaluate_songs, EvalMode};
use mer_core::model::Model;

use crate::config::{prepare_output, require_dir, require_file, ResolvedConfig};
use crate::EvaluateArgs;

pub fn run(args: EvaluateArgs) -> Result<()> {
    require_file(&args.checkpoint, "checkpoint")?;
    require_dir(&args.features_dir, "features")?;
    require_dir(&args.annotations_dir, "annotations")?;
    let mode = match args.mode.as_str() {
        "pooled" => EvalMode::Pooled,
        "per-song-mean" => EvalMode::PerSongMean,
        other => {
            return Err(Error::Config(format!(
                "mode must be pooled or per-song-mean, got {other:?}"
            )))
        }
    };
    if args.seq_len == 0 {
        return Err(Error::Config("seq_len must be >= 1".into()));
    }

    let model = Model::load(&args.checkpoint)?;
    let pairs = load_dataset(&args.features_dir, &args.annotations_dir)?;
    if pairs.is_empty() {
        return Err(Error::Ingestion(format!(
            "no songs under {}",
            args.features_dir.display()
        )));
    }
    if pairs[0].0.feature_dim() != model.spec().feature_dim {
        return Err(Error::dimension(
            "checkpoint feature_dim vs data",
            &[model.spec().feature_dim],
            &[pairs[0].0.feature_dim()],
        ));
    }

    let result = evaluate_songs(&model, &pairs, args.seq_len, mode)?;

    println!(
        "{} songs, seq_len {}, {} RMSE",
        pairs.len(),
        args.seq_len,
        if result.pooled { "pooled" } else { "per-song-mean" }
    );
    println!("valence  arousal  average");
    println!(
        "{:.6}  {:.6}  {:.6}",
        result.rmse_valence, result.rmse_arousal, result.rmse_average
    );

    if let Some(out) = &args.out {
        let mut resolved = ResolvedConfig::default();
        resolved.put("checkpoint", args.checkpoint.display());
        resolved.put("features_dir", args.features_dir.display());
        resolved.put("annotations_dir", args.annotations_dir.display());
        resolved.put("seq_len", args.seq_len);
        resolved.put("eval_mode", &args.mode);
        resolved.put("out", out.display());

        let mut csv = String::new();
        let _ = writeln!(csv, "# {}", resolved.provenance());
        let _ = writeln!(csv, "scope,song_id,rmse_valence,rmse_arousal,rmse_average");
        let _ = writeln!(
            csv,
            "overall,,{:.16e},{:.16e},{:.16e}",
            result.rmse_valence, result.rmse_arousal, result.rmse_average
        );
        for (song, rv, ra) in &result.per_song {
            let _ = writeln!(
                csv,
                "song,{song},{:.16e},{:.16e},{:.16e}",
                rv,
                ra,
                0.5 * (rv + ra)
            );
        }
        prepare_output(out)?;
        std::fs::write(out, csv)?;
        println!("results: {}", out.display());
    }
    Ok(())
}
