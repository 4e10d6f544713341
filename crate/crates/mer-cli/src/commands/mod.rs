pub mod evaluate;
pub mod extract;
pub mod param_count;
pub mod predict;
pub mod sweep;
pub mod train;

use std::path::PathBuf;

use mer_core::error::{Error, Result};
use mer_core::model::ModelSpec;
use mer_core::training::TrainConfig;

use crate::config::{require_dir, FileConfig, ResolvedConfig};
use crate::CommonArgs;

/// Fully resolved model/training settings shared by `train` and `sweep`.
pub(crate) struct Setup {
    pub features_dir: PathBuf,
    pub annotations_dir: PathBuf,
    /// Expected feature dimensionality; inferred from the data when absent.
    pub feature_dim: Option<usize>,
    pub cnn_filters: usize,
    pub fc_units: usize,
    pub gru_units: usize,
    pub branched: bool,
    pub dropout: f64,
    pub maxout_pieces: usize,
    pub train: TrainConfig,
    pub file: FileConfig,
    pub resolved: ResolvedConfig,
}

impl Setup {
    pub fn spec(&self, feature_dim: usize) -> ModelSpec {
        let mut spec = ModelSpec::new(feature_dim);
        spec.cnn_filters = self.cnn_filters;
        spec.fc_units = self.fc_units;
        spec.gru_units = self.gru_units;
        spec.branched = self.branched;
        spec.dropout_rate = self.dropout;
        spec.maxout_pieces = self.maxout_pieces;
        spec
    }

    /// Checks the configured feature dimension against the loaded data.
    pub fn checked_feature_dim(&self, data_dim: usize) -> Result<usize> {
        match self.feature_dim {
            Some(want) if want != data_dim => Err(Error::dimension(
                "configured feature_dim vs data",
                &[want],
                &[data_dim],
            )),
            _ => Ok(data_dim),
        }
    }
}

/// Merges flags over the config file, applies defaults, validates paths and
/// records every resolved value for the provenance hash.
pub(crate) fn resolve_common(common: &CommonArgs) -> Result<Setup> {
    let file = match &common.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };

    let features_dir = file
        .resolve_path(&common.features_dir, "features_dir")?
        .ok_or_else(|| Error::Config("features_dir is required".into()))?;
    let annotations_dir = file
        .resolve_path(&common.annotations_dir, "annotations_dir")?
        .ok_or_else(|| Error::Config("annotations_dir is required".into()))?;
    require_dir(&features_dir, "features")?;
    require_dir(&annotations_dir, "annotations")?;

    let feature_dim = file.resolve(&common.feature_dim, "feature_dim")?;
    let cnn_filters = file.resolve(&common.cnn_filters, "cnn_filters")?.unwrap_or(8);
    let fc_units = file.resolve(&common.fc_units, "fc_units")?.unwrap_or(8);
    let gru_units = file.resolve(&common.gru_units, "gru_units")?.unwrap_or(8);
    let branched = file.resolve(&common.branched, "branched")?.unwrap_or(true);
    let dropout = file.resolve(&common.dropout, "dropout")?.unwrap_or(0.25);
    let maxout_pieces = file.resolve(&common.maxout_pieces, "maxout_pieces")?.unwrap_or(2);

    let defaults = TrainConfig::default();
    let train = TrainConfig {
        batch_size: file.resolve(&common.batch_size, "batch_size")?.unwrap_or(defaults.batch_size),
        seq_len: file.resolve(&common.seq_len, "seq_len")?.unwrap_or(defaults.seq_len),
        learning_rate: file
            .resolve(&common.learning_rate, "learning_rate")?
            .unwrap_or(defaults.learning_rate),
        beta1: defaults.beta1,
        beta2: defaults.beta2,
        adam_eps: defaults.adam_eps,
        l1: file.resolve(&common.l1, "l1")?.unwrap_or(defaults.l1),
        l2: file.resolve(&common.l2, "l2")?.unwrap_or(defaults.l2),
        max_epochs: file.resolve(&common.max_epochs, "max_epochs")?.unwrap_or(defaults.max_epochs),
        patience: file.resolve(&common.patience, "patience")?.unwrap_or(defaults.patience),
        seed: file.resolve(&common.seed, "seed")?.unwrap_or(defaults.seed),
        val_fraction: file
            .resolve(&common.val_fraction, "val_fraction")?
            .unwrap_or(defaults.val_fraction),
    };
    train.validate()?;

    let mut resolved = ResolvedConfig::default();
    resolved.put("features_dir", features_dir.display());
    resolved.put("annotations_dir", annotations_dir.display());
    if let Some(fd) = feature_dim {
        resolved.put("feature_dim", fd);
    }
    resolved.put("cnn_filters", cnn_filters);
    resolved.put("fc_units", fc_units);
    resolved.put("gru_units", gru_units);
    resolved.put("branched", branched);
    resolved.put("dropout", dropout);
    resolved.put("maxout_pieces", maxout_pieces);
    resolved.put("batch_size", train.batch_size);
    resolved.put("seq_len", train.seq_len);
    resolved.put("learning_rate", train.learning_rate);
    resolved.put("l1", train.l1);
    resolved.put("l2", train.l2);
    resolved.put("max_epochs", train.max_epochs);
    resolved.put("patience", train.patience);
    resolved.put("seed", train.seed);
    resolved.put("val_fraction", train.val_fraction);

    Ok(Setup {
        features_dir,
        annotations_dir,
        feature_dim,
        cnn_filters,
        fc_units,
        gru_units,
        branched,
        dropout,
        maxout_pieces,
        train,
        file,
        resolved,
    })
}
