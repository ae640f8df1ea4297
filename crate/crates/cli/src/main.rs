//! `pdisorder`: solve, bound, simulate and evaluate the two-channel Poisson
//! disorder problem.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error,
//! 3 solver non-convergence, 4 missing value-function artifact.

mod artifacts;
mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use poisson_disorder::model::DiscountMode;

use crate::config::{Overrides, RunConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "pdisorder", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the configured discount mode.
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
    /// Worker threads for solver sweeps and replications.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Iterate the value function to convergence.
    Solve,
    /// Case classification and analytic region data.
    Bounds,
    /// Sample observation paths and their statistic.
    Simulate,
    /// Monte Carlo risk of the configured policy.
    Evaluate,
    /// Solve and evaluate over a parameter list.
    Sweep,
}

#[derive(ValueEnum, Clone, Copy)]
enum Mode {
    Rederived,
    PaperLiteral,
}

impl From<Mode> for DiscountMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Rederived => DiscountMode::Rederived,
            Mode::PaperLiteral => DiscountMode::PaperLiteral,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Other(e.into()))?;
    }
    let path = cli
        .config
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let cfg = RunConfig::load(
        &path,
        Overrides {
            seed: cli.seed,
            mode: cli.mode.map(Into::into),
        },
    )?;
    match cli.command {
        Command::Solve => commands::solve(&cfg, &cli.out),
        Command::Bounds => commands::bounds(&cfg, &cli.out),
        Command::Simulate => commands::simulate(&cfg, &cli.out),
        Command::Evaluate => commands::evaluate(&cfg, &cli.out),
        Command::Sweep => commands::sweep(&cfg, &cli.out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pdisorder: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
