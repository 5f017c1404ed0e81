//! Argument definitions for the `aol` binary.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use aol_core::estimators::Method;

#[derive(Debug, Parser)]
#[command(
    name = "aol",
    version,
    about = "Estimate the OOD accuracy of classifier sets from ID/OOD agreement",
    after_help = "The AOL_THREADS environment variable caps internal parallelism."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute ID/OOD metric tables plus probit-scale scatter CSVs
    Metrics(MetricsArgs),
    /// Fit the agreement line and judge whether it supports prediction
    Diagnose(DiagnoseArgs),
    /// Predict per-model OOD accuracy with one method
    Predict(PredictArgs),
    /// Run methods against OOD labels and report MAE in percent
    Bench(BenchArgs),
    /// ALine-D estimation error over random model subsets of varying size
    Ablate(AblateArgs),
    /// Generate synthetic data: a model zoo or exact-line metric tables
    Synth(SynthArgs),
}

/// Input selection shared by table-driven commands: either a dataset
/// manifest or a pair of previously emitted metric-table JSON files.
#[derive(Debug, Args)]
pub struct InputArgs {
    /// Dataset manifest (JSON)
    #[arg(
        long,
        value_name = "PATH",
        required_unless_present = "tables",
        conflicts_with = "tables"
    )]
    pub manifest: Option<PathBuf>,
    /// Metric tables: ID table then OOD table
    #[arg(long, value_name = "PATH", num_args = 2)]
    pub tables: Option<Vec<PathBuf>>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Dataset manifest (JSON)
    #[arg(long, value_name = "PATH")]
    pub manifest: PathBuf,
    /// Output directory for tables and scatter CSVs
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Output report path (JSON)
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Seed for the slope-difference bootstrap
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Models per bootstrap subset
    #[arg(long, default_value_t = 10)]
    pub subset_size: usize,
    /// Bootstrap resamples
    #[arg(long, default_value_t = 1000)]
    pub resamples: usize,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Estimation method
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    /// Output report path (JSON)
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Run ALine methods even under a WEAK diagnosis
    #[arg(long)]
    pub force: bool,
    /// Skip the temperature-scaled variants of the confidence baselines
    #[arg(long)]
    pub no_calibration: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Methods to run (defaults to every feasible method)
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    pub methods: Vec<Method>,
    /// Output directory for the report and scatter CSV
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Skip the temperature-scaled variants of the confidence baselines
    #[arg(long)]
    pub no_calibration: bool,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Subset sizes to evaluate
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    /// Random subsets per size
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output report path (JSON)
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Also evaluate architecture-homogeneous subsets (requires
    /// architecture tags in the manifest)
    #[arg(long)]
    pub group_by_architecture: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Emit exact-line metric tables instead of a sampled zoo
    #[arg(long)]
    pub exact_line: bool,
    /// Planted slope (exact-line mode)
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub slope: f64,
    /// Planted bias (exact-line mode)
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub bias: f64,
    /// Nominal sample count of exact-line tables
    #[arg(long, default_value_t = 20_000)]
    pub m: u64,
    /// Number of models
    #[arg(long, default_value_t = 50)]
    pub models: usize,
    /// ID-validation examples (zoo mode)
    #[arg(long, default_value_t = 20_000)]
    pub m_id: usize,
    /// OOD examples (zoo mode)
    #[arg(long, default_value_t = 20_000)]
    pub m_ood: usize,
    /// Class count (zoo mode)
    #[arg(long, default_value_t = 10)]
    pub classes: u32,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub skill_lo: f64,
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    pub skill_hi: f64,
    /// OOD difficulty mean shift (zoo mode)
    #[arg(long, default_value_t = 0.25, allow_negative_numbers = true)]
    pub shift: f64,
    /// OOD difficulty scale (zoo mode)
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub scale: f64,
    /// Shared-noise coupling in [0, 1] (zoo mode)
    #[arg(long, default_value_t = 0.95, allow_negative_numbers = true)]
    pub coupling: f64,
    /// Write synthetic logits consistent with the hard predictions
    #[arg(long)]
    pub emit_logits: bool,
    /// Preset that breaks agreement-on-the-line (diagnosis ends up WEAK)
    #[arg(long)]
    pub break_line: bool,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
}
