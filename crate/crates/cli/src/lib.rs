//! Command line front end: configuration, subcommands and figure recipes.

pub mod commands;
pub mod config;
pub mod error;
pub mod family;
pub mod oracle;
pub mod output;
pub mod repro;

use std::path::Path;

use serde_json::Value;

pub use config::RunConfig;
pub use error::CliError;
pub use output::Output;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Census,
    Sweep,
    Stability,
    Evolve,
    Image,
    Oracle,
}

/// Runs `command` with its outputs in `dir`.
pub fn run(command: Command, cfg: &RunConfig, dir: &Path, jobs: usize) -> Result<Value, CliError> {
    // Reject a missing section before anything is written.
    match command {
        Command::Sweep if cfg.sweep.is_none() => {
            return Err(CliError::Usage("sweep needs a [sweep] section with axis and target".into()))
        }
        Command::Evolve if cfg.evolve.is_none() => {
            return Err(CliError::Usage("evolve needs an [evolve] section with state and t_end".into()))
        }
        _ => {}
    }
    let out = Output::create(dir, cfg)?;
    let jobs = jobs.max(1);
    match command {
        Command::Census => commands::cmd_census(cfg, &out, jobs),
        Command::Sweep => commands::cmd_sweep(cfg, &out, jobs),
        Command::Stability => commands::cmd_stability(cfg, &out, jobs),
        Command::Evolve => commands::cmd_evolve(cfg, &out, jobs),
        Command::Image => commands::cmd_image(cfg, &out, jobs),
        Command::Oracle => commands::cmd_oracle(cfg, &out, jobs),
    }
}
