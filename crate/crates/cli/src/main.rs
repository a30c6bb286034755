//! `brainib`: synthesize cohorts, train, evaluate, rank nodes and compute
//! graph metrics. Every command writes a `manifest.json` into its output
//! directory.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "brainib", version, about = "Graph information-bottleneck classification of brain connectivity graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a planted-subgraph cohort.
    Synth(SynthArgs),
    /// Cross-validated training.
    Train(TrainArgs),
    /// Accuracy of a checkpoint on a dataset.
    Evaluate(EvaluateArgs),
    /// Rank nodes by mean subgraph probability.
    Rank(RankArgs),
    /// Topology metrics and optional group comparison.
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub nodes: usize,
    #[arg(long)]
    pub per_class: usize,
    /// Comma-separated 1-based node ids.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub planted: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub signal: f64,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset directory with `matrices/` and `labels.csv`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = brainib_core::graph_data::DEFAULT_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// TOML file with training keys; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lambda_mi: Option<f64>,
    #[arg(long)]
    pub lr_model: Option<f64>,
    #[arg(long)]
    pub lr_subgraph: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Any other config key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, default_value_t = 1)]
    pub parallel_folds: usize,
    /// Stop every fold after this many epochs, keeping resumable state.
    #[arg(long)]
    pub halt_after: Option<usize>,
    /// Continue from the state files in `--out`.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Training summary whose fold test subjects restrict the evaluation.
    #[arg(long, requires = "fold")]
    pub summary: Option<PathBuf>,
    /// 1-based fold number within `--summary`.
    #[arg(long, requires = "summary")]
    pub fold: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Repeatable; assignments from all checkpoints are pooled.
    #[arg(long, required = true)]
    pub checkpoint: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = brainib_core::subgraph::DEFAULT_TOP_K)]
    pub top_k: usize,
    /// Ranking CSV to compare against.
    #[arg(long)]
    pub compare: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Welch tests with BH correction between the two classes.
    #[arg(long)]
    pub compare_groups: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Train(a) => commands::train(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Rank(a) => commands::rank(&a),
        Command::Metrics(a) => commands::metrics(&a),
    };
    match result {
        Ok(message) => {
            println!("{message}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}
