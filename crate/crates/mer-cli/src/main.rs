//! `mer` — train and evaluate the valence/arousal music emotion regressor.
//!
//! Exit codes: 0 success, 1 configuration/usage error, 2 data error,
//! 3 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mer_core::error::Error;

#[derive(Parser)]
#[command(
    name = "mer",
    version,
    about = "Continuous valence-arousal music emotion regression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract log mel-band energy features from a directory of WAV files
    Extract(ExtractArgs),
    /// Train a model and write a checkpoint plus a training report
    Train(TrainArgs),
    /// Train/evaluate a grid of sequence lengths and seeds
    Sweep(SweepArgs),
    /// Evaluate a checkpoint against annotated songs
    Evaluate(EvaluateArgs),
    /// Predict per-segment valence/arousal from a feature CSV
    Predict(PredictArgs),
    /// Print the trainable parameter count of a configuration
    ParamCount(ParamCountArgs),
}

#[derive(Args)]
struct ExtractArgs {
    /// Directory of 16-bit PCM WAV files
    #[arg(long)]
    audio_dir: PathBuf,
    /// Output directory; one feature CSV per song
    #[arg(long)]
    out_dir: PathBuf,
    /// Mel band count
    #[arg(long, default_value_t = mer_core::audio::DEFAULT_N_MELS)]
    n_mels: usize,
}

/// Model and training knobs shared by `train` and `sweep`. Every flag can
/// also come from the `--config` file; flags win.
#[derive(Args, Clone)]
struct CommonArgs {
    /// key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    features_dir: Option<PathBuf>,
    #[arg(long)]
    annotations_dir: Option<PathBuf>,
    /// Expected feature dimensionality (inferred from data when omitted)
    #[arg(long)]
    feature_dim: Option<usize>,
    #[arg(long)]
    cnn_filters: Option<usize>,
    #[arg(long)]
    fc_units: Option<usize>,
    #[arg(long)]
    gru_units: Option<usize>,
    /// true: one branch per emotion dimension; false: one shared branch
    #[arg(long)]
    branched: Option<bool>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    maxout_pieces: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seq_len: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    l1: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fraction of songs held out for early stopping
    #[arg(long)]
    val_fraction: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Checkpoint output path
    #[arg(long)]
    checkpoint_out: Option<PathBuf>,
    /// Training report CSV output path
    #[arg(long)]
    report_out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Held-out evaluation features (optional)
    #[arg(long)]
    eval_features_dir: Option<PathBuf>,
    /// Held-out evaluation annotations (optional)
    #[arg(long)]
    eval_annotations_dir: Option<PathBuf>,
    /// Result table CSV output path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sequence lengths to sweep
    #[arg(long, value_delimiter = ',')]
    seq_lens: Option<Vec<usize>>,
    /// One training run per seed
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    features_dir: PathBuf,
    #[arg(long)]
    annotations_dir: PathBuf,
    /// Evaluation window length
    #[arg(long, default_value_t = 60)]
    seq_len: usize,
    /// pooled | per-song-mean
    #[arg(long, default_value = "pooled")]
    mode: String,
    /// Optional CSV output (overall plus per-song rows)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Feature CSV (may hold several songs)
    #[arg(long)]
    features: PathBuf,
    /// Prediction CSV output path
    #[arg(long)]
    out: PathBuf,
    /// Evaluation window length
    #[arg(long, default_value_t = 60)]
    seq_len: usize,
}

#[derive(Args)]
struct ParamCountArgs {
    #[arg(long, default_value_t = 260)]
    feature_dim: usize,
    #[arg(long)]
    branched: Option<bool>,
    #[arg(long)]
    cnn_filters: Option<usize>,
    #[arg(long)]
    fc_units: Option<usize>,
    #[arg(long)]
    gru_units: Option<usize>,
    #[arg(long)]
    maxout_pieces: Option<usize>,
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Dimension { .. } => 1,
        Error::Numerical(_) => 3,
        Error::PartialRuns { source, .. } => exit_code(source),
        _ => 2,
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Extract(args) => commands::extract::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Sweep(args) => commands::sweep::run(args),
        Command::Evaluate(args) => commands::evaluate::run(args),
        Command::Predict(args) => commands::predict::run(args),
        Command::ParamCount(args) => commands::param_count::run(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}
