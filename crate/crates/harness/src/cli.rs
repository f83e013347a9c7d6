use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{Overrides, ScenarioConfig};
use crate::error::{exit, HarnessError, Result};
use crate::{batch, filter, simulate, verify};

#[derive(Debug, Parser)]
#[command(name = "kalman-harness", version, about = "Simulate, filter, batch-estimate and verify linear Gaussian models")]
pub struct Cli {
    /// Scenario config (TOML).
    #[arg(long, global = true, default_value = "kalman.toml")]
    pub config: PathBuf,

    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Master seed, overriding `run.master_seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Multiplier applied to every identity tolerance in `verify`.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub tol_scale: f64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample Monte-Carlo trajectories to CSV.
    Simulate,
    /// Filter the measurements of a trajectory CSV.
    Filter {
        #[arg(long)]
        trajectory: PathBuf,
    },
    /// Solve a batch problem described by a TOML manifest.
    Batch {
        #[arg(long)]
        problem: PathBuf,
    },
    /// Run the identity suite and scenario consistency checks.
    Verify,
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            seed: self.seed,
        }
    }

    fn scenario(&self) -> Result<ScenarioConfig> {
        ScenarioConfig::load(&self.config, &self.overrides())
    }
}

fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    match &cli.command {
        Command::Simulate => simulate::cmd_simulate(&cli.scenario()?),
        Command::Filter { trajectory } => Ok(vec![filter::cmd_filter(&cli.scenario()?, trajectory)?]),
        Command::Batch { problem } => {
            // the batch command needs no scenario; --out alone decides where results go
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            Ok(vec![batch::cmd_batch(problem, &out)?])
        }
        Command::Verify => {
            if !(cli.tol_scale.is_finite() && cli.tol_scale > 0.0) {
                return Err(HarnessError::config("--tol-scale", "must be positive and finite"));
            }
            let (path, _) = verify::cmd_verify(&cli.scenario()?, cli.tol_scale)?;
            Ok(vec![path])
        }
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

/// Runs the command and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", display(&p));
            }
            exit::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
