//! `mer predict`: per-segment valence/arousal from a feature CSV, clamped to
//! [-1, 1], bit-identical to the library forward pass.

use mer_core::dataset::{parse_feature_csv, write_annotation_csv};
use mer_core::error::{Error, Result};
use mer_core::evaluation::predict_song;
use mer_core::model::Model;

use crate::config::{prepare_output, require_file, ResolvedConfig};
use crate::PredictArgs;

pub fn run(args: PredictArgs) -> Result<()> {
    require_file(&args.checkpoint, "checkpoint")?;
    require_file(&args.features, "feature CSV")?;
    if args.seq_len == 0 {
        return Err(Error::Config("seq_len must be >= 1".into()));
    }

    let model = Model::load(&args.checkpoint)?;
    let text = std::fs::read_to_string(&args.features)?;
    let songs = parse_feature_csv(&text, &args.features.display().to_string())?;
    if songs.is_empty() {
        return Err(Error::Ingestion(format!(
            "no songs in {}",
            args.features.display()
        )));
    }
    if songs[0].feature_dim() != model.spec().feature_dim {
        return Err(Error::dimension(
            "checkpoint feature_dim vs feature CSV",
            &[model.spec().feature_dim],
            &[songs[0].feature_dim()],
        ));
    }

    let mut predictions = Vec::with_capacity(songs.len());
    for song in &songs {
        predictions.push(predict_song(&model, song, args.seq_len)?);
    }

    let mut resolved = ResolvedConfig::default();
    resolved.put("checkpoint", args.checkpoint.display());
    resolved.put("features", args.features.display());
    resolved.put("out", args.out.display());
    resolved.put("seq_len", args.seq_len);

    prepare_output(&args.out)?;
    std::fs::write(
        &args.out,
        write_annotation_csv(
            &predictions.iter().collect::<Vec<_>>(),
            Some(&resolved.provenance()),
        ),
    )?;
    println!(
        "{} songs, {} segments -> {}",
        predictions.len(),
        predictions.iter().map(|p| p.len()).sum::<usize>(),
        args.out.display()
    );
    Ok(())
}
