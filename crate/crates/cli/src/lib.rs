//! Command-line front end for `moe-ram`.
//!
//! Exit codes: 0 on success, 2 for configuration or usage errors, 3 for
//! data, checkpoint and I/O errors. `MRAM_THREADS` sets the number of worker
//! threads used for per-sample work; results do not depend on it.

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use moe_ram::router::RouterKind;
use moe_ram::trainer::TrainConfig;
use moe_ram::MoeError;

mod commands;
pub mod json;
pub mod report;

pub use commands::execute;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { code: EXIT_DATA, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<MoeError> for CliError {
    fn from(e: MoeError) -> Self {
        match e {
            MoeError::Config(_) => Self::usage(e.to_string()),
            _ => Self::data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::data(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "moe-ram", version, about = "Statistic-augmented mixture-of-experts for scenario-aware segmentation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic multi-scenario dataset.
    GenData(GenDataArgs),
    /// Train a model and write a checkpoint, a step log and a report.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Train every router kind for every seed and tabulate test metrics.
    Compare(CompareArgs),
    /// Dump prototypes and, optionally, projected sample features.
    InspectFrl(InspectArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = moe_ram::data::DEFAULT_SCENARIOS)]
    pub scenarios: usize,
    #[arg(long, default_value_t = moe_ram::data::DEFAULT_PER_SCENARIO)]
    pub per_scenario: usize,
    #[arg(long, default_value_t = moe_ram::data::DEFAULT_DIM)]
    pub dim: usize,
    #[arg(long, default_value_t = moe_ram::data::DEFAULT_PIXELS)]
    pub pixels: usize,
    #[arg(long, default_value_t = moe_ram::data::DEFAULT_CLASSES)]
    pub classes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Extra samples per scenario drawn from the same scenarios and written
    /// to `--holdout-out`.
    #[arg(long, default_value_t = 0, requires = "holdout_out")]
    pub holdout: usize,
    #[arg(long)]
    pub holdout_out: Option<PathBuf>,
}

/// Model and optimization flags shared by `train` and `compare`.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = TrainConfig::default().n_experts)]
    pub experts: usize,
    #[arg(long, default_value_t = TrainConfig::default().top_k)]
    pub top_k: usize,
    #[arg(long, default_value_t = TrainConfig::default().prototypes_per_expert)]
    pub prototypes: usize,
    #[arg(long, default_value_t = TrainConfig::default().eta)]
    pub eta: f64,
    #[arg(long, default_value_t = TrainConfig::default().tau)]
    pub tau: f64,
    #[arg(long, default_value_t = TrainConfig::default().epsilon)]
    pub epsilon: f64,
    #[arg(long, default_value_t = TrainConfig::default().lambda_lb)]
    pub lambda_lb: f64,
    #[arg(long, default_value_t = TrainConfig::default().lambda_frl)]
    pub lambda_frl: f64,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    pub lr: f64,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    pub batch: usize,
    #[arg(long, default_value_t = TrainConfig::default().steps)]
    pub steps: usize,
}

impl ModelArgs {
    pub fn config(&self, router: RouterKind, seed: u64, dim: usize, pixels: usize, classes: usize) -> TrainConfig {
        TrainConfig {
            n_experts: self.experts,
            top_k: self.top_k,
            prototypes_per_expert: self.prototypes,
            feature_dim: dim,
            pixels,
            classes,
            eta: self.eta,
            tau: self.tau,
            epsilon: self.epsilon,
            lambda_lb: self.lambda_lb,
            lambda_frl: self.lambda_frl,
            learning_rate: self.lr,
            batch_size: self.batch,
            steps: self.steps,
            seed,
            router_kind: router,
            ..TrainConfig::default()
        }
    }
}

fn parse_router(s: &str) -> Result<RouterKind, String> {
    RouterKind::from_cli_name(s).ok_or_else(|| format!("unknown router {s:?}; expected moe-rm, linear or soft"))
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = TrainConfig::default().seed)]
    pub seed: u64,
    #[arg(long, default_value = "moe-rm", value_parser = parse_router)]
    pub router: RouterKind,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Write the JSON here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_delimiter = ',', default_value = "moe-rm,linear,soft", value_parser = parse_router)]
    pub routers: Vec<RouterKind>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub data: PathBuf,
    /// Held-out set for the metrics; the training set when omitted.
    #[arg(long)]
    pub eval_data: Option<PathBuf>,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Write the prototype table here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Dataset whose samples are projected with their top-1 expert.
    #[arg(long, requires = "features_out")]
    pub with_features: Option<PathBuf>,
    #[arg(long)]
    pub features_out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
