//! `downscale` - generate synthetic heterogeneous precipitation pairs,
//! train the attention super-resolution network, run the statistical
//! baselines, evaluate everything with the same metrics, and compare.

mod commands;
mod config_file;
mod dataset;
mod manifest;
mod pgm;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "downscale", version, about = "Precipitation downscaling toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset of biased low-res / truth high-res pairs
    Synth(SynthArgs),
    /// Train the attention super-resolution model on a dataset directory
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset split and emit a metrics CSV
    Eval(EvalArgs),
    /// Run a statistical baseline (quantile mapping or BCSD) on a split
    Baseline(BaselineArgs),
    /// Merge metrics CSVs into one ranked comparison table
    Compare(CompareArgs),
}

#[derive(clap::Args)]
pub struct SynthArgs {
    /// Output dataset directory
    #[arg(long)]
    pub out: PathBuf,
    /// Number of days to generate
    #[arg(long)]
    pub days: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Low-resolution grid as ROWSxCOLS
    #[arg(long, value_name = "HxW")]
    pub lr_shape: Option<String>,
    /// High-resolution grid as ROWSxCOLS
    #[arg(long, value_name = "HxW")]
    pub hr_shape: Option<String>,
    /// Probability that a day is completely dry
    #[arg(long)]
    pub dry_prob: Option<f64>,
    /// Multiplicative wet bias of the low-resolution source
    #[arg(long)]
    pub wet_bias: Option<f64>,
    /// Rain-pattern displacement in high-res cells, as DROW,DCOL
    #[arg(long, value_name = "DR,DC")]
    pub displacement: Option<String>,
    /// Gaussian smoothing sigma of the biased copy, in high-res cells
    #[arg(long)]
    pub smooth: Option<f64>,
    /// Orographic gain coefficient
    #[arg(long)]
    pub gain: Option<f64>,
    /// Rain-cell count range per wet day, as MIN-MAX
    #[arg(long, value_name = "MIN-MAX")]
    pub cells: Option<String>,
    /// Calendar date of the first day
    #[arg(long)]
    pub start_date: Option<chrono::NaiveDate>,
    /// key=value config file mirroring these flags
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct TrainArgs {
    /// Dataset directory produced by `downscale synth`
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for checkpoint, history, manifest
    #[arg(long)]
    pub out: PathBuf,
    /// Scaling factor (2, 4, 5, or 8)
    #[arg(long)]
    pub scale: Option<usize>,
    /// Backbone depth; the studied settings are 16, 32, and 48
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub filters: Option<usize>,
    /// Upscaling layer: shuffle, deconv, bilinear, or bicubic
    #[arg(long)]
    pub upscale: Option<String>,
    /// Concatenate terrain at the high-resolution fusion: on or off
    #[arg(long)]
    pub topo: Option<String>,
    /// Parameter-initialization and shuffling seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seed of the 80/10/10 split (keep identical across train/eval)
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Adam learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub cab_nodes: Option<usize>,
    #[arg(long)]
    pub shrink_channels: Option<usize>,
    #[arg(long)]
    pub head_layers: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Which split to evaluate: test, val, train, or all
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub split_seed: Option<u64>,
    /// Also dump per-day |prediction - truth| rasters as 16-bit PGM
    #[arg(long)]
    pub dump_rasters: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct BaselineArgs {
    /// qm or bcsd
    #[arg(long)]
    pub method: String,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub split_seed: Option<u64>,
    /// Day-of-year half window for the empirical CDFs
    #[arg(long)]
    pub window: Option<u32>,
    /// Also write the per-day corrected fields as GRD1
    #[arg(long)]
    pub dump_corrected: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct CompareArgs {
    /// Metrics CSVs produced by eval/baseline; the file stem names the method
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Output table path (.md or .csv); stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn init_threads() {
    if let Ok(raw) = std::env::var("DOWNSCALE_THREADS") {
        if let Ok(n) = raw.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => commands::synth::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Baseline(args) => commands::baseline::run(args),
        Command::Compare(args) => commands::compare::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
