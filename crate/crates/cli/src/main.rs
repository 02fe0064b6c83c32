//! `iss-epinet`: simulate, certify, thresholds and sweep from TOML documents.
//!
//! Exit codes: 0 success, 1 not certified, 2 configuration error,
//! 3 integration or output failure.

mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "iss-epinet",
    version,
    about = "Stability certificates, thresholds and simulations for epidemic networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
pub struct Common {
    /// TOML configuration document.
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for sweeps; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Seed for sampled checks.
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the configured system; writes CSV, SVG and a JSON summary.
    Simulate(Common),
    /// Run the small-gain test and print the certificate as JSON.
    Certify(Common),
    /// Print bifurcation point, input threshold, R0 and equilibria as JSON.
    Thresholds(Common),
    /// Evaluate claims over a parameter grid; writes a long-format CSV.
    Sweep(Common),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ISS_EPINET_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => commands::simulate(c),
        Command::Certify(c) => commands::certify(c),
        Command::Thresholds(c) => commands::thresholds(c),
        Command::Sweep(c) => commands::sweep(c),
    };
    match result {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}
