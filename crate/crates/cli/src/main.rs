//! `dchoice`: batch driver for delayed-choice prepare-and-measure analyses.
//!
//! Exit codes: 0 success, 1 usage/config/IO error, 2 domain error (e.g.
//! enumeration cap, empty postselected cell), 3 spacetime validation failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::Status;
use config::Preset;

#[derive(Parser)]
#[command(
    name = "dchoice",
    version,
    about = "Delayed-choice prepare-and-measure toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact outcome probabilities and witness values for a scenario.
    Predict(ScenarioArgs),
    /// Finite-count run: sampled counts, estimates and bootstrap error bars.
    Simulate(SimulateArgs),
    /// Classical hidden-variable bounds by enumeration and mixture search.
    Bounds(BoundsArgs),
    /// Lightcone checks on an event schedule.
    Spacetime(SpacetimeArgs),
    /// Witness report with bootstrap errors from a recorded counts CSV.
    Report(ReportArgs),
}

#[derive(Args)]
pub struct ScenarioArgs {
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in setting set, instead of --config.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Postselect on detections (overrides the config).
    #[arg(long, value_name = "BOOL")]
    fair_sampling: Option<bool>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Trials per setting pair.
    #[arg(long, value_name = "N")]
    trials: Option<u64>,
    #[arg(long, value_name = "N")]
    resamples: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum WitnessKind {
    /// Dimension witness I_DW.
    Idw,
    /// Determinant witness |det W|.
    Det,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ModelArg {
    /// Preparation and measurement boxes with private randomness.
    Independent,
    /// Arbitrary shared randomness between the boxes.
    Shared,
}

#[derive(Args)]
pub struct BoundsArgs {
    /// Classical message dimension.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, value_enum)]
    witness: WitnessKind,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Mixture-search restarts (det only).
    #[arg(long, default_value_t = 10_000)]
    restarts: usize,
    /// Coordinate-ascent moves per restart (det only).
    #[arg(long, default_value_t = 60)]
    steps: usize,
    /// Randomness model for the det mixture search.
    #[arg(long, value_enum, default_value = "independent")]
    model: ModelArg,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SpacetimeArgs {
    /// Schedule JSON; defaults to the bundled 46 m geometry.
    #[arg(long, value_name = "PATH")]
    schedule: Option<PathBuf>,
    /// Run configuration with a `schedule` section.
    #[arg(long, value_name = "PATH", conflicts_with = "schedule")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Counts CSV with columns i,j,n_e,n_d,n_none.
    #[arg(long, value_name = "PATH")]
    counts: PathBuf,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, value_name = "N")]
    resamples: Option<usize>,
    #[arg(long, value_name = "BOOL")]
    fair_sampling: Option<bool>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<dchoice_core::Error>() {
        Some(e) if e.is_domain() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Predict(a) => commands::predict(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Bounds(a) => commands::bounds(a),
        Command::Spacetime(a) => commands::spacetime(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::ValidationFailed) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
