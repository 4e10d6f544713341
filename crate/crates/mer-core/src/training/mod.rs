//! Training loop: backpropagation through time over fixed-length windows,
//! Adam updates, ElasticNet regularization and early stopping on held-out
//! songs.

mod adam;
mod loss;

pub use adam::{adam_step, AdamState};
pub use loss::{elasticnet_penalty, rmse_loss};

use std::fmt::Write as _;

use crate::dataset::{batches, slice_sequences, split_by_hash, SongPair};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_songs, EvalMode};
use crate::model::{Model, ModelSpec};
use crate::numerics::Rng;

/// Training hyperparameters. Defaults: mini-batches of 32, Adam at its
/// standard rates, L1 0.1 and L2 0.001.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub seq_len: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub l1: f64,
    pub l2: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Fraction of songs held out for early stopping, selected by id hash.
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            seq_len: 60,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            l1: 0.1,
            l2: 0.001,
            max_epochs: 1000,
            patience: 50,
            seed: 1,
            val_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seq_len == 0 || self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0
        {
            return Err(Error::Config(
                "seq_len, batch_size, max_epochs and patience must be >= 1".into(),
            ));
        }
        if self.learning_rate < 0.0 || self.l1 < 0.0 || self.l2 < 0.0 {
            return Err(Error::Config("rates must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || self.adam_eps <= 0.0
        {
            return Err(Error::Config("invalid Adam settings".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config(format!(
                "val_fraction must be in [0, 1), got {}",
                self.val_fraction
            )));
        }
        Ok(())
    }
}

/// One line of the training history.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean over the epoch's batches of loss plus penalty.
    pub train_loss: f64,
    pub val_rmse_valence: f64,
    pub val_rmse_arousal: f64,
}

/// Everything a run reports: the per-epoch history and where it stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_rmse_avg: f64,
    pub stopped_early: bool,
    /// True when no songs hashed into the validation split and the
    /// validation columns report training-set evaluation instead.
    pub val_is_train: bool,
}

impl RunReport {
    /// CSV rendering: `epoch,train_loss,val_rmse_valence,val_rmse_arousal`.
    pub fn to_csv(&self, comment: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(c) = comment {
            let _ = writeln!(out, "# {c}");
        }
        let _ = writeln!(out, "epoch,train_loss,val_rmse_valence,val_rmse_arousal");
        for e in &self.epochs {
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e}",
                e.epoch, e.train_loss, e.val_rmse_valence, e.val_rmse_arousal
            );
        }
        out
    }
}

/// Builds a model from `cfg.seed`, splits the songs into train/validation by
/// id hash, and trains. Returns the model restored to its best-validation
/// parameters plus the report.
pub fn train(spec: &ModelSpec, pairs: &[SongPair], cfg: &TrainConfig) -> Result<(Model, RunReport)> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::InvalidInput("training on an empty dataset".into()));
    }
    let mut rng = Rng::new(cfg.seed);
    let mut model = Model::build(spec.clone(), &mut rng)?;
    let (train_pairs, val_pairs) = split_by_hash(pairs, cfg.val_fraction);
    let report = train_with_split(&mut model, &train_pairs, &val_pairs, cfg, &mut rng)?;
    Ok((model, report))
}

/// Core loop over an explicit train/validation partition. `rng` drives
/// shuffling and dropout; pass the generator used to build the model for a
/// fully seeded run.
pub fn train_with_split(
    model: &mut Model,
    train_pairs: &[SongPair],
    val_pairs: &[SongPair],
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<RunReport> {
    cfg.validate()?;
    let windows = slice_sequences(train_pairs, cfg.seq_len, false);
    if windows.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no training windows: songs shorter than seq_len {}?",
            cfg.seq_len
        )));
    }
    let val_is_train = val_pairs.is_empty();
    let eval_pairs: &[SongPair] = if val_is_train { train_pairs } else { val_pairs };

    let mut report = RunReport {
        seed: cfg.seed,
        epochs: Vec::new(),
        best_epoch: 0,
        best_val_rmse_avg: f64::INFINITY,
        stopped_early: false,
        val_is_train,
    };
    let mut opt = AdamState::new();
    let mut best_model: Option<Model> = None;

    for epoch in 1..=cfg.max_epochs {
        let mut loss_sum = 0.0;
        let mut batch_count = 0usize;
        for batch in batches(&windows, cfg.batch_size, rng, true) {
            let (pred, cache) = model.forward_train(&batch.inputs, rng)?;
            let (loss, grad_pred) = rmse_loss(&pred, &batch.targets, &batch.mask)?;
            let (penalty, dkernel_pen, dact_pen) = elasticnet_penalty(
                model.params().get("conv.kernel"),
                cache.conv_activations(),
                cfg.l1,
                cfg.l2,
                batch.inputs.shape()[0],
            );
            let total = loss + penalty;
            if !total.is_finite() {
                return Err(Error::Numerical(format!(
                    "loss diverged at epoch {epoch}, batch {batch_count} (loss {loss}, penalty {penalty})"
                )));
            }
            let mut grads = model.backward(&cache, &grad_pred, Some(&dact_pen))?;
            grads
                .get_mut("conv.kernel")
                .expect("conv kernel gradient present")
                .add_assign(&dkernel_pen);
            adam_step(
                model.params_mut(),
                &grads,
                &mut opt,
                cfg.learning_rate,
                cfg.beta1,
                cfg.beta2,
                cfg.adam_eps,
            );
            loss_sum += total;
            batch_count += 1;
        }

        let eval = evaluate_songs(model, eval_pairs, cfg.seq_len, EvalMode::Pooled)?;
        let val_avg = eval.rmse_average;
        if !val_avg.is_finite() {
            return Err(Error::Numerical(format!(
                "validation RMSE diverged at epoch {epoch}"
            )));
        }
        report.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / batch_count as f64,
            val_rmse_valence: eval.rmse_valence,
            val_rmse_arousal: eval.rmse_arousal,
        });

        if val_avg < report.best_val_rmse_avg {
            report.best_val_rmse_avg = val_avg;
            report.best_epoch = epoch;
            best_model = Some(model.clone());
        } else if epoch - report.best_epoch >= cfg.patience {
            report.stopped_early = true;
            break;
        }
    }

    if let Some(best) = best_model {
        *model = best;
    }
    Ok(report)
}
