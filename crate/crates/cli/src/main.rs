//! `ttp`: generate instances, solve them, validate and plot timetables,
//! collect value-network samples and check inference parity.
//!
//! Exit codes: 0 success, 1 validation or parity failure (or no feasible
//! timetable found), 2 usage or input error.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "ttp", version, about = "Single-track train timetabling with MCTS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate random instances on a line.
    Gen(GenArgs),
    /// Solve one instance and write its timetable.
    Solve(SolveArgs),
    /// Check a timetable against every constraint of its instance.
    Validate(ValidateArgs),
    /// Solve many instances and store root-child samples in a dataset.
    Collect(CollectArgs),
    /// Compare forward-pass outputs against a parity file.
    InferCheck(InferCheckArgs),
    /// Write time-distance polylines as CSV and an SVG diagram.
    Plot(PlotArgs),
}

#[derive(Args)]
pub struct GenArgs {
    /// Instance or line JSON whose line and timing parameters are used.
    /// Defaults to the bundled corridor.
    #[arg(long)]
    pub line: Option<PathBuf>,
    #[arg(long, short)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of instances, with seeds `seed..seed+count`.
    #[arg(long, default_value_t = 1)]
    pub count: u64,
    /// First departures are drawn from `0..=window` minutes.
    #[arg(long, default_value_t = ttp_core::instance::DEFAULT_DEPARTURE_WINDOW)]
    pub window: u32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Uct,
    Max1,
    Max2,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum RolloutArg {
    Plain,
    Csav,
}

/// Planner settings: defaults, then `--config`, then individual flags.
#[derive(Args, Clone)]
pub struct PlannerArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub cb: Option<u32>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    #[arg(long, value_enum)]
    pub rollout: Option<RolloutArg>,
    #[arg(long)]
    pub cp: Option<f64>,
    /// VAF1 weights used to warm up new tree nodes.
    #[arg(long)]
    pub warmup: Option<PathBuf>,
}

#[derive(Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[command(flatten)]
    pub planner: PlannerArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Also store root-child samples in this dataset directory.
    #[arg(long)]
    pub samples: Option<PathBuf>,
}

#[derive(Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Timetable as CSV or JSON (by extension).
    #[arg(long)]
    pub timetable: PathBuf,
    /// Directory for the report and run manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct CollectArgs {
    /// Glob of instance JSON files.
    #[arg(long)]
    pub instances: String,
    #[command(flatten)]
    pub planner: PlannerArgs,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Encoder frame width in minutes.
    #[arg(long, default_value_t = ttp_core::vaf::arch::FULL_COLS)]
    pub full_cols: usize,
    #[arg(long, default_value_t = ttp_core::vaf::arch::LOCAL_COLS)]
    pub local_cols: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct InferCheckArgs {
    #[arg(long)]
    pub parity: PathBuf,
    /// Weights to use instead of the ones the parity file names.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Extra random inputs checked for finite outputs.
    #[arg(long, default_value_t = 0)]
    pub random: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub timetable: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Solve(a) => commands::solve(a),
        Command::Validate(a) => commands::validate(a),
        Command::Collect(a) => commands::collect(a),
        Command::InferCheck(a) => commands::infer_check(a),
        Command::Plot(a) => commands::plot(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
