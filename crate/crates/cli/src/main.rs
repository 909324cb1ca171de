#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod error;
mod sweep;

use error::CliError;

#[derive(Parser)]
#[command(
    name = "cipd",
    version,
    about = "Charge-integration photon detector simulator and estimator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a pulsed-light run and write frames, events, histograms and a summary.
    Simulate(SimulateArgs),
    /// Simulate a dark run (no light source).
    Dark(SimulateArgs),
    /// Fit the Poisson-Gaussian mixture to an events file.
    Fit(FitArgs),
    /// Print volts per carrier, read noise and S/N as one JSON line.
    Snr(SnrArgs),
    /// Evaluate S/N and discrimination error over a parameter grid.
    Sweep(SweepArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    /// JSON run configuration; the bundled device configuration when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub frames: Option<u64>,
    /// Width of histogram.csv bins, electrons.
    #[arg(long, default_value_t = 0.1)]
    pub bin_width: f64,
    /// Replace the configured noise with this σ in electrons.
    #[arg(long)]
    pub sigma_e: Option<f64>,
    /// Omit the timestamp from summary.json.
    #[arg(long)]
    pub no_timestamp: bool,
}

#[derive(Args)]
pub struct FitArgs {
    /// One value per line, or CSV with a header row.
    pub events: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV column to read; defaults to measured_delta_e when present, else the first column.
    #[arg(long)]
    pub column: Option<String>,
    #[arg(long, default_value_t = 0.1)]
    pub bin_width: f64,
    #[arg(long, default_value = "nearest")]
    pub mode: cipd::ClassifyMode,
    /// Fixed Poisson cutoff; chosen from the data when omitted.
    #[arg(long)]
    pub l_max: Option<u32>,
    /// Also fit a gain and offset on the electron axis.
    #[arg(long)]
    pub affine: bool,
    #[arg(long, default_value_t = 500)]
    pub max_iterations: usize,
    /// Accepted for symmetry with the other commands; fitting is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct SnrArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of carriers in the signal.
    #[arg(long, default_value_t = 1)]
    pub n: u64,
    #[arg(long, conflicts_with = "sigma_from_psd")]
    pub sigma_e: Option<f64>,
    /// Use the CDS read noise of the configured spectrum, without leakage shot noise.
    #[arg(long)]
    pub sigma_from_psd: bool,
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// KEY=START:STOP:STEP; give once or twice.
    #[arg(long = "sweep", required = true)]
    pub sweeps: Vec<String>,
    #[arg(long, default_value = "nearest")]
    pub mode: cipd::ClassifyMode,
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Simulate(a) => commands::simulate(&a, false),
        Command::Dark(a) => commands::simulate(&a, true),
        Command::Fit(a) => commands::fit(&a),
        Command::Snr(a) => commands::snr(&a),
        Command::Sweep(a) => sweep::sweep(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            return CliError::Invalid(first.trim_start_matches("error: ").to_string()).report();
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => e.report(),
    }
}
