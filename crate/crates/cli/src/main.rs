use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use hopcheck::encoder::Backend;
use hopcheck::evaluate::{AgreementMode, BucketRule};
use hopcheck::perturb::Setting;
use hopcheck::train::{LossMode, RegimePreset};
use hopcheck::DEFAULT_SEED;

mod commands;
mod report;

#[derive(Parser, Debug)]
#[command(
    name = "hopcheck",
    version,
    about = "Multi-hop fact verification toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert a source dataset into the canonical format
    Import(ImportArgs),
    /// Check a canonical dataset against the record invariants
    Validate(ValidateArgs),
    /// Corpus statistics
    Stats(StatsArgs),
    /// One instance per evidence chain, optionally with a dev split
    SplitChains(SplitArgs),
    /// Keep evidence plus an equal-size sample of other sentences
    EvenSplit(PerturbArgs),
    /// Even split, then swap non-evidence for entity-sharing sentences
    Adversarial(PerturbArgs),
    /// Random or TF-IDF + Naive Bayes reference predictions
    Baseline(BaselineArgs),
    /// Train a model over a staged regime
    Train(TrainArgs),
    /// Score a checkpoint or a predictions file
    Evaluate(EvaluateArgs),
    /// Evidence metrics for a range of top-k values
    SweepK(SweepArgs),
    /// Bucketed metrics, attention ratios and significance tests
    Analyze(AnalyzeArgs),
    /// Jensen-Shannon divergence between corpora
    Divergence(DivergenceArgs),
    /// Inter-annotator agreement
    Agreement(AgreementArgs),
}

#[derive(Args, Debug)]
struct ImportArgs {
    /// politihop, liar-plus or fever
    #[arg(long)]
    format: String,
    #[arg(long)]
    input: PathBuf,
    /// Adapter TOML overriding the format preset
    #[arg(long)]
    mapping: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Number of chain instances held out as dev
    #[arg(long)]
    dev_count: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PerturbArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Replacement pool: sentence-per-line file, or a canonical dataset (.jsonl)
    #[arg(long)]
    pool: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct SettingArgs {
    #[arg(long, default_value = "full")]
    setting: Setting,
    /// Replacement pool for the adversarial setting
    #[arg(long)]
    pool: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    /// random or tfidf-nb
    #[arg(long)]
    kind: String,
    /// Training data (tfidf-nb only)
    #[arg(long)]
    train: Option<PathBuf>,
    /// Data to predict
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    setting: SettingArgs,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Experiment TOML
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    preset: Option<RegimePreset>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    hops: Option<usize>,
    #[arg(long)]
    topk: Option<usize>,
    #[arg(long)]
    loss: Option<LossMode>,
    #[arg(long)]
    backend: Option<Backend>,
    #[arg(long)]
    sentence_ids: bool,
    #[arg(long)]
    setting: Option<Setting>,
    #[arg(long)]
    pool: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct SourceArgs {
    /// Checkpoint directory written by `train`
    #[arg(
        long,
        conflicts_with = "predictions",
        required_unless_present = "predictions"
    )]
    checkpoint: Option<PathBuf>,
    /// Predictions file (one JSON record per line)
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Gold data
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    setting: SettingArgs,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Evidence size; defaults to 6 for checkpoints, as-is for predictions files
    #[arg(long)]
    topk: Option<usize>,
    /// chain-length, ne-overlap or confidence; repeatable
    #[arg(long)]
    bucket: Vec<BucketRule>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, default_value_t = 1)]
    k_min: usize,
    #[arg(long, default_value_t = 10)]
    k_max: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long)]
    topk: Option<usize>,
    /// Scores of system A (one number per line or a JSON array)
    #[arg(long, requires = "sample_b")]
    sample_a: Option<PathBuf>,
    #[arg(long, requires = "sample_a")]
    sample_b: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DivergenceArgs {
    /// Canonical datasets to compare pairwise (two or more)
    #[arg(long = "dataset", num_args = 1.., required = true)]
    datasets: Vec<PathBuf>,
    /// Text fields to compare: sentences, claims or all
    #[arg(long, default_value = "sentences")]
    fields: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AgreementArgs {
    /// Annotation records, one JSON object per line
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long, default_value = "label")]
    mode: AgreementMode,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
