//! `behinv`: experiment runner for data-driven input recovery.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use behinv::{set_rank_tolerance, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Overrides the relative singular-value threshold used for every rank decision.
const RANK_TOL_ENV: &str = "BEHINV_RANK_TOL";

#[derive(Debug, Parser)]
#[command(
    name = "behinv",
    version,
    about = "Recover LTI inputs from output data with a pre-collected data bank"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Report invertibility properties of a plant.
    Analyze(AnalyzeArgs),
    /// Excite a plant with a persistently exciting input and save the data bank.
    Collect(CollectArgs),
    /// Simulate a plant from rest, writing `u.csv` and `y.csv`.
    Simulate(SimulateArgs),
    /// Estimate the input that produced an output stream.
    Estimate(EstimateArgs),
    /// Run the data-driven disturbance observer loop.
    Dob(DobArgs),
    /// Track a desired output under an input box.
    Track(TrackArgs),
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Plant JSON with matrices A, B, C, D.
    #[arg(long)]
    plant: PathBuf,
    /// Past window length; defaults to the observability index.
    #[arg(long)]
    tp: Option<usize>,
    /// Future window length; enables the PE order report.
    #[arg(long)]
    tf: Option<usize>,
    /// Largest delay searched; defaults to the state dimension.
    #[arg(long)]
    max_delay: Option<usize>,
}

#[derive(Debug, Args)]
struct CollectArgs {
    #[arg(long)]
    plant: PathBuf,
    /// Bank length T; T + L samples are recorded.
    #[arg(long)]
    length: usize,
    #[arg(long)]
    tp: usize,
    #[arg(long)]
    tf: usize,
    /// Inversion delay L; defaults to the inherent delay.
    #[arg(long)]
    delay: Option<usize>,
    /// PE order of the excitation; defaults to n + T_p + T_f + L.
    #[arg(long)]
    order: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bank directory to create.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    plant: PathBuf,
    /// Input CSV; a seeded uniform input is drawn when absent.
    #[arg(long, conflicts_with_all = ["length", "seed"])]
    u: Option<PathBuf>,
    #[arg(long, required_unless_present = "u")]
    length: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Block estimates of T_f samples.
    Batch,
    /// One estimate per sample with delay L.
    Realtime,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long)]
    bank: PathBuf,
    /// Output stream CSV.
    #[arg(long)]
    y: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Batch)]
    mode: Mode,
    /// Input history CSV; rest when absent.
    #[arg(long, requires = "init_y")]
    init_u: Option<PathBuf>,
    /// Output history CSV; rest when absent.
    #[arg(long, requires = "init_u")]
    init_y: Option<PathBuf>,
    /// True input CSV, for the error report and the comparison CSV.
    #[arg(long)]
    u_true: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DobArgs {
    #[arg(long)]
    plant: PathBuf,
    #[arg(long)]
    bank: PathBuf,
    /// Command input CSV.
    #[arg(long)]
    u0: PathBuf,
    /// Disturbance CSV.
    #[arg(long)]
    d: PathBuf,
    /// Steps run before the observer engages; defaults to T_p + L.
    #[arg(long)]
    startup: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrackArgs {
    #[arg(long)]
    bank: PathBuf,
    /// Input history CSV holding T_p samples.
    #[arg(long)]
    u_past: PathBuf,
    /// Output history CSV holding T_p samples.
    #[arg(long)]
    y_past: PathBuf,
    /// Desired output CSV holding T_f + L samples.
    #[arg(long)]
    y_star: PathBuf,
    /// Bounds JSON `{"lower": [...], "upper": [...]}`; unbounded when absent.
    #[arg(long)]
    bounds: Option<PathBuf>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn apply_rank_tolerance() -> Result<(), Error> {
    let Ok(raw) = std::env::var(RANK_TOL_ENV) else {
        return Ok(());
    };
    match raw.trim().parse::<f64>() {
        Ok(t) if t > 0.0 && t.is_finite() => {
            set_rank_tolerance(Some(t));
            Ok(())
        }
        _ => Err(Error::InvalidArgument(format!(
            "{RANK_TOL_ENV} must be a positive number, got {raw:?}"
        ))),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    apply_rank_tolerance()?;
    match cli.command {
        Command::Analyze(a) => commands::analyze(&a),
        Command::Collect(a) => commands::collect(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Estimate(a) => commands::estimate(&a),
        Command::Dob(a) => commands::dob(&a),
        Command::Track(a) => commands::track(&a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
