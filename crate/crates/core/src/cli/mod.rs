//! Command-line front end: configuration, dispatch and CSV/JSON output.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod output;

pub use commands::execute;
pub use config::{parse_config, KeyArgs, RunConfig, Variant, KEYS};
pub use output::{fmt17, Artifact, Format};

/// Errors surfaced to the command line, each mapped to an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error for key `{key}`{}: {msg}", line_suffix(*.line))]
    Parse { key: String, line: Option<usize>, msg: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn line_suffix(line: Option<usize>) -> String {
    line.map(|l| format!(" (line {l})")).unwrap_or_default()
}

impl CliError {
    pub fn parse(key: &str, line: Option<usize>, msg: impl Into<String>) -> Self {
        CliError::Parse { key: key.to_string(), line, msg: msg.into() }
    }

    /// 2 for bad input, 3 for numerical failure, 1 for i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    /// Prefixes the message with the command that failed.
    pub fn context(self, command: &str) -> Self {
        match self {
            CliError::Validation(m) => CliError::Validation(format!("{command}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{command}: {m}")),
            other => other,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        use crate::Error as E;
        match e {
            E::BracketingFailure { .. } | E::Numerical(_) | E::KinkPoint(_) | E::Unreachable { .. } => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "attention", version, about = "Optimal attention between two biased news sources")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommandArgs {
    /// Config file: `key = value` lines or a flat JSON object.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub keys: KeyArgs,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Regime, cutoffs and the value/policy grid.
    Solve(CommandArgs),
    /// Discrete-time dynamic program and its gap to the closed form.
    Oracle(CommandArgs),
    /// Monte-Carlo decision paths from one prior.
    Simulate(CommandArgs),
    /// Population of decision makers over time.
    Population(CommandArgs),
    /// Comparative statics over one key.
    Sweep(CommandArgs),
    /// HJB residuals and boundary gaps on a grid.
    Diagnose(CommandArgs),
    /// First-period choices of the two-period problem.
    Twoperiod(CommandArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Oracle(_) => "oracle",
            Command::Simulate(_) => "simulate",
            Command::Population(_) => "population",
            Command::Sweep(_) => "sweep",
            Command::Diagnose(_) => "diagnose",
            Command::Twoperiod(_) => "twoperiod",
        }
    }

    pub fn args(&self) -> &CommandArgs {
        match self {
            Command::Solve(a)
            | Command::Oracle(a)
            | Command::Simulate(a)
            | Command::Population(a)
            | Command::Sweep(a)
            | Command::Diagnose(a)
            | Command::Twoperiod(a) => a,
        }
    }
}

/// Parses the configuration, runs the command and writes its artifacts.
/// Returns the paths written (empty when the main artifact went to stdout).
pub fn run(command: &Command) -> Result<Vec<PathBuf>, CliError> {
    let name = command.name();
    let args = command.args();
    let cfg = parse_config(args.config.as_deref(), &args.keys.to_map())?;
    let artifacts = execute(name, &cfg).map_err(|e| e.context(name))?;
    output::write_artifacts(name, &cfg, &artifacts)
}
