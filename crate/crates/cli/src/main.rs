//! `mmant` command-line front end.
//!
//! Exit codes: 0 success, 2 usage or invalid input, 3 numeric failure,
//! 4 I/O failure.

mod commands;
mod config;
mod fmt;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mmant::ula::Axis;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] mmant::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use mmant::Error as E;
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                E::Arg(_) | E::Schema(_) | E::Domain(_) | E::Plan(_) | E::Grid(_) => 2,
                E::Singularity(_) | E::DegenerateData(_) => 3,
                E::Io { .. } | E::Json(_) | E::Csv(_) | E::Ingest(_) => 4,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Ait,
    Wm,
}

#[derive(Debug, Parser)]
#[command(name = "mmant", version, about = "Multi-mode antenna modeling and ML direction finding")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the stand-in calibration dataset generated from the published
    /// wavefield model.
    Synthesize {
        #[arg(long, default_value_t = 5.0)]
        grid_step: f64,
        /// Output file; `.json` selects JSON, anything else CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit an AIT or WM model to calibration data.
    Fit(FitArgs),
    /// Evaluate a model on a regular angle grid.
    Interpolate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        grid_step: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Transformation / approximation error of a model on calibration data.
    Error {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// ML direction-of-arrival estimation from a snapshot file or from
    /// synthesized snapshots.
    Doa(DoaArgs),
    /// Run the sweeps of a configuration file, one CSV per sweep.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, clap::Args)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub model: Family,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Fit report CSV; printed to stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub elements: Option<usize>,
    #[arg(long)]
    pub spacing: Option<f64>,
    #[arg(long)]
    pub axis: Option<Axis>,
    #[arg(long)]
    pub sector_size: Option<f64>,
    #[arg(long)]
    pub overlap: Option<f64>,
    #[arg(long)]
    pub coeffs: Option<usize>,
}

#[derive(Debug, clap::Args)]
pub struct DoaArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Snapshot CSV (`snapshot,port,re,im`); excludes synthesis.
    #[arg(long, conflicts_with_all = ["theta", "data", "snr_db", "runs", "seed"])]
    pub input: Option<PathBuf>,
    /// Calibration data the snapshots are drawn from; defaults to the
    /// synthesized dataset at --grid-step.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 5.0)]
    pub grid_step: f64,
    /// Source angle on the calibration grid (repeat for two sources).
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Vec<f64>,
    /// Noise-free when absent.
    #[arg(long, allow_negative_numbers = true)]
    pub snr_db: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub snapshots: usize,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub sources: usize,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    let result = match cli.command {
        Command::Synthesize { grid_step, out } => commands::synthesize(grid_step, &out),
        Command::Fit(args) => commands::fit(&args),
        Command::Interpolate { model, grid_step, out } => commands::interpolate(&model, grid_step, &out),
        Command::Error { model, data, out } => commands::error(&model, &data, out.as_deref()),
        Command::Doa(args) => commands::doa(&args),
        Command::Sweep { config, out } => commands::sweep(&config, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
