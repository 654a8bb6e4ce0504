//! Config-driven front end for `pullback-core`.
//!
//! Exit codes: 0 success, 1 scientific failure (a hypothesis or the gap
//! fails, a certified run is not absorbed, the energy residual is over
//! budget, a path blows up), 2 usage or validation error.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use pullback_core::Error;
use thiserror::Error as ThisError;

pub use commands::{run, Command, Outcome};
pub use config::{Overrides, RunConfig};

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(Error::Precondition(_) | Error::Divergence(_) | Error::BlowUp { .. }) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pullback", version, about = "Mean-square pullback absorption experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed, overrides `seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of Monte Carlo paths.
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads, 0 for all cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum CliCommand {
    /// Sample the structural hypotheses and the gap.
    Check,
    /// Noise intensity threshold eps0.
    Threshold,
    /// Absorbing radius R(tau).
    Radius,
    /// Integrate sample paths.
    Simulate,
    /// Pullback absorption experiment.
    Absorb,
    /// Decay rate fit and energy residual.
    Decay,
}

impl From<CliCommand> for Command {
    fn from(c: CliCommand) -> Self {
        match c {
            CliCommand::Check => Command::Check,
            CliCommand::Threshold => Command::Threshold,
            CliCommand::Radius => Command::Radius,
            CliCommand::Simulate => Command::Simulate,
            CliCommand::Absorb => Command::Absorb,
            CliCommand::Decay => Command::Decay,
        }
    }
}

/// Loads the config, applies overrides and runs `command`.
pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    cfg.apply(&Overrides {
        seed: cli.seed,
        paths: cli.paths,
        out: cli.out.clone(),
        workers: cli.workers,
    });
    run(cli.command.into(), &cfg)
}
