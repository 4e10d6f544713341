//! `mer train`: fit one model, write the best checkpoint and the per-epoch
//! report.

use mer_core::dataset::load_dataset;
use mer_core::error::{Error, Result};
use mer_core::training::train;

use crate::config::prepare_output;
use crate::TrainArgs;

pub fn run(args: TrainArgs) -> Result<()> {
    let mut setup = super::resolve_common(&args.common)?;
    let checkpoint_out = setup
        .file
        .resolve_path(&args.checkpoint_out, "checkpoint_out")?
        .ok_or_else(|| Error::Config("checkpoint_out is required".into()))?;
    let report_out = setup
        .file
        .resolve_path(&args.report_out, "report_out")?
        .ok_or_else(|| Error::Config("report_out is required".into()))?;

    setup.resolved.put("checkpoint_out", checkpoint_out.display());
    setup.resolved.put("report_out", report_out.display());
    let provenance = setup.resolved.provenance();

    let pairs = load_dataset(&setup.features_dir, &setup.annotations_dir)?;
    if pairs.is_empty() {
        return Err(Error::Ingestion(format!(
            "no songs under {}",
            setup.features_dir.display()
        )));
    }
    let feature_dim = setup.checked_feature_dim(pairs[0].0.feature_dim())?;
    let spec = setup.spec(feature_dim);

    let (model, report) = train(&spec, &pairs, &setup.train)?;

    prepare_output(&checkpoint_out)?;
    model.save(&checkpoint_out)?;
    prepare_output(&report_out)?;
    std::fs::write(&report_out, report.to_csv(Some(&provenance)))?;

    let best = report
        .epochs
        .iter()
        .find(|e| e.epoch == report.best_epoch)
        .expect("best epoch recorded");
    println!(
        "trained on {} songs, seq_len {}, seed {} ({} epochs{})",
        pairs.len(),
        setup.train.seq_len,
        setup.train.seed,
        report.epochs.len(),
        if report.stopped_early { ", stopped early" } else { "" },
    );
    println!(
        "best epoch {}: {} RMSE valence {:.6} arousal {:.6} average {:.6}",
        report.best_epoch,
        if report.val_is_train { "train-set" } else { "validation" },
        best.val_rmse_valence,
        best.val_rmse_arousal,
        report.best_val_rmse_avg,
    );
    println!("checkpoint: {}", checkpoint_out.display());
    println!("report: {}", report_out.display());
    Ok(())
}
