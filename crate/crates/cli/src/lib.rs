//! Batch front end: load a config and data, run an optimiser or sampler,
//! and write results as JSON and CSV.

pub mod config;
pub mod data;
pub mod model;
pub mod output;
pub mod setup;

mod commands;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Failure classes, each with its own exit status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    /// Bad config, flags or input files.
    Config(String),
    /// The run itself failed.
    Run(String),
    /// Too many failed model evaluations.
    FailureCap(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 1,
            CliError::FailureCap(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Run(m) => write!(f, "run failed: {m}"),
            CliError::FailureCap(m) => write!(f, "evaluation failure cap reached: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Parser)]
#[command(name = "tsinfer", version, about = "Fit and sample time-series models from a config file")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find the best-scoring parameters.
    Optimise(RunArgs),
    /// Draw posterior samples with MCMC or nested sampling.
    Sample(RunArgs),
}

/// Flags override the matching `[method]` and `[run]` settings.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// INI file with [problem], [method] and [run] sections.
    pub config: PathBuf,
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Number of MCMC chains (ignored by optimisers and nested sampling).
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Suppress progress messages.
    #[arg(long)]
    pub quiet: bool,
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match &cli.command {
        Command::Optimise(args) => commands::optimise(args),
        Command::Sample(args) => commands::sample(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("tsinfer: {e}");
            e.exit_code()
        }
    }
}
