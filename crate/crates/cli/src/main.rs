//! `fraclyap` command-line experiment runner.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration or precondition
//! error, 3 solver divergence, 4 at least one VIOLATED estimate.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;
mod format;

use commands::{Output, RunOptions};
use config::ExperimentConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "fraclyap", version, about = "Fractional operators, Lyapunov estimates and fractional SEIR experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the SEIR model and write a t,S,E,I,R CSV.
    Simulate(Common),
    /// Check Lyapunov-derivative estimates and write JSON reports.
    Verify(VerifyArgs),
    /// Report R0 and the equilibria as JSON.
    Equilibria(Common),
    /// Simulate a corpus of initial states and report convergence.
    Stability(Common),
    /// Sweep one model parameter and report the attractor per value.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output file (defaults to the config's `output`, then stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Divide every time step by this factor.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    refine: u32,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Compare rhs <= lhs instead of lhs <= rhs (harness self-test).
    #[arg(long, hide = true)]
    swap_sides: bool,
}

fn run(cli: Cli) -> Result<Output, CliError> {
    let (common, swap_sides) = match &cli.command {
        Command::Verify(v) => (&v.common, v.swap_sides),
        Command::Simulate(c) | Command::Equilibria(c) | Command::Stability(c) | Command::Sweep(c) => (c, false),
    };
    let cfg = ExperimentConfig::load(&common.config)?;
    let opts = RunOptions { out: common.out.clone(), refine: common.refine as usize, swap_sides };
    match cli.command {
        Command::Simulate(_) => commands::simulate_cmd(&cfg, &opts),
        Command::Verify(_) => commands::verify_cmd(&cfg, &opts),
        Command::Equilibria(_) => commands::equilibria_cmd(&cfg, &opts),
        Command::Stability(_) => commands::stability_cmd(&cfg, &opts),
        Command::Sweep(_) => commands::sweep_cmd(&cfg, &opts),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli).and_then(|out| out.write()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
