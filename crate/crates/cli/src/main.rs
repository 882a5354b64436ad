//! `minent`: rate sweeps, sampling-bound verification, end-to-end protocol
//! simulation and the cross-module invariant suite, with CSV/report output
//! that is byte-identical for a fixed configuration and seed.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::CommonOpts;

/// Errors carrying their exit code: 1 verification failure, 2 configuration
/// error, 3 resource guard.
#[derive(Debug)]
pub enum CliError {
    Verification(String),
    Config(String),
    Resource(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Config(_) => 2,
            CliError::Resource(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Verification(m) | CliError::Config(m) | CliError::Resource(m) => m,
        }
    }
}

impl From<minent_core::Error> for CliError {
    fn from(e: minent_core::Error) -> Self {
        match e {
            minent_core::Error::ResourceGuard { .. } => CliError::Resource(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "minent",
    version,
    about = "Sampling-based min-entropy bounds, key-rate sweeps, protocol simulation and privacy amplification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the three key-length formulas over N and emit CSV
    Rates(CommonOpts),
    /// Compare Monte Carlo worst-case sampling failure against the tail bound
    #[command(name = "sample-verify")]
    SampleVerify(CommonOpts),
    /// Run the protocol end to end: source, subset test, measurement, extraction
    Simulate(CommonOpts),
    /// Execute every module invariant suite
    Verify(CommonOpts),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Rates(opts) => commands::rates::run(opts),
        Command::SampleVerify(opts) => commands::sample_verify::run(opts),
        Command::Simulate(opts) => commands::simulate::run(opts),
        Command::Verify(opts) => commands::verify::run(opts),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
