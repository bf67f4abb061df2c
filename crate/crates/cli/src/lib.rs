//! Command-line front end: reproduces the standard maximum, the sharing
//! sweeps and the noise thresholds as CSV and `key = value` files.

pub mod commands;
pub mod format;
pub mod manifest;

use clap::{Parser, Subcommand};

use commands::{MaxViolationArgs, NoiseArgs, ReproduceArgs, SweepArgs};

/// Exit status for a failed tolerance or consistency check.
pub const EXIT_TOLERANCE: i32 = 1;
/// Exit status for invalid arguments.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Tolerance(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(fnn_core::Error),
}

impl From<fnn_core::Error> for CliError {
    fn from(e: fnn_core::Error) -> Self {
        use fnn_core::Error;
        match e {
            Error::InvalidParameter { .. } => CliError::Usage(e.to_string()),
            Error::OracleMismatch { .. } => CliError::Tolerance(e.to_string()),
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_TOLERANCE,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "fnn", version, about = "Full network nonlocality sharing in the extended bilocal scenario")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Maximal KGT violation with a single, strong Charlie.
    MaxViolation(MaxViolationArgs),
    /// Witness values over a grid of the precision factor G.
    Sweep(SweepArgs),
    /// Werner-visibility thresholds for a violation.
    Noise(NoiseArgs),
    /// Run everything with default parameters and compare against reference values.
    ReproduceAll(ReproduceArgs),
}

/// Runs one parsed command, printing its report. Returns the exit status.
pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::MaxViolation(a) => commands::max_violation(a).map(|o| {
            print!("{}", o.summary.render());
            0
        }),
        Command::Sweep(a) => commands::sweep(a).map(|o| {
            print!("{}", o.summary.render());
            0
        }),
        Command::Noise(a) => commands::noise(a).map(|o| {
            print!("{}", o.summary.render());
            0
        }),
        Command::ReproduceAll(a) => commands::reproduce_all(a).map(|(manifest, dir)| {
            print!("{}", commands::render_checks(&manifest.checks));
            println!("output = {}", dir.display());
            if manifest.all_pass() {
                0
            } else {
                EXIT_TOLERANCE
            }
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    })
}
