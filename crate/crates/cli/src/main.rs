//! `kagnn` command-line driver.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

mod commands;
mod data;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kagnn::model::Variant;

#[derive(Debug, Parser)]
#[command(name = "kagnn", version, about = "Fourier KAN graph models for molecular property prediction")]
pub struct Cli {
    /// Worker threads for batch evaluation; 0 uses every core.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    /// Directory used to resolve relative data paths that do not exist as given.
    #[arg(long, global = true, env = "KAGNN_DATA_DIR")]
    pub data_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert molecules (JSON-lines or SDF) into featurized graphs.
    Featurize(FeaturizeArgs),
    /// Train a model and write checkpoints, a report and per-epoch CSVs.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Fit the univariate target functions with a Fourier KAN and an MLP.
    Fitfn(FitfnArgs),
    /// Compare analytic gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Train over one-factor-at-a-time hyperparameter grids.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Inferred from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<data::Format>,
    /// Cutoff radius in Å.
    #[arg(long, default_value_t = kagnn::molgraph::DEFAULT_CUTOFF)]
    pub cutoff: f64,
    #[arg(long)]
    pub output: PathBuf,
}

/// Training flags; each overrides the config file.
#[derive(Debug, Args, Clone, Default)]
pub struct TrainFlags {
    /// JSON file with training configuration fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Harmonics per Fourier function.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Molecule JSON-lines, SDF, or featurized-graph JSON-lines.
    #[arg(long)]
    pub data: PathBuf,
    /// Split file `{"train": [..], "valid": [..], "test": [..]}`; random 8:1:1 otherwise.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Evaluate only the test list of this split file.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Cutoff used when `data` holds molecules; defaults to the checkpoint's.
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Also write the evaluation JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitfnArgs {
    /// Target name, or `all` for the six reference targets.
    #[arg(long, default_value = "all")]
    pub target: String,
    /// Override the reference harmonic count.
    #[arg(long)]
    pub k: Option<usize>,
    /// Polynomial K sweep instead of single fits, e.g. `--sweep-k 1,5,50,500`.
    #[arg(long, value_delimiter = ',')]
    pub sweep_k: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    /// Skip the MLP baseline.
    #[arg(long)]
    pub kan_only: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    /// Random graphs per model variant.
    #[arg(long)]
    pub graphs: Option<usize>,
    /// Parameter entries checked per tensor and graph.
    #[arg(long, conflicts_with = "full")]
    pub coords: Option<usize>,
    /// Check every parameter entry.
    #[arg(long)]
    pub full: bool,
    /// Write the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Test hook: corrupt the analytic gradients so the check must fail.
    #[arg(long, hide = true)]
    pub corrupt: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep manifest; the built-in grids are used when omitted.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    pub fn from_core(e: kagnn::Error) -> Self {
        use kagnn::Error as E;
        match e {
            E::InvalidArgument(_) => CliError::Usage(e.to_string()),
            E::Numeric(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }

    pub fn context(self, what: &str) -> Self {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{what}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{what}: {m}")),
            CliError::Numeric(m) => CliError::Numeric(format!("{what}: {m}")),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<kagnn::Error> for CliError {
    fn from(e: kagnn::Error) -> Self {
        CliError::from_core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let threads = cli.threads;
    match kagnn::parallel::with_threads(threads, || commands::run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kagnn: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
