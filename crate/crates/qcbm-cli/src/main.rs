//! `qcbm` — train and evaluate quantum circuit Born machines on
//! Bars-and-Stripes targets.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CliError, Study};

#[derive(Parser)]
#[command(name = "qcbm", version, about = "Quantum circuit Born machine training laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config file.
    Run {
        /// Path to the experiment config.
        #[arg(long)]
        config: PathBuf,
        /// Bound on parallel worker threads.
        #[arg(long)]
        jobs: Option<usize>,
        /// Validate the config and exit without running.
        #[arg(long)]
        dry_run: bool,
    },
    /// Re-run a canned study and write its summary tables.
    Reproduce {
        #[arg(value_enum)]
        study: Study,
        /// Independent seeds per configuration cell.
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        /// Bound on parallel worker threads.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Evaluate a circuit checkpoint against a BAS target; prints JSON.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Target shape as HxW, e.g. 2x2.
        #[arg(long)]
        bas: String,
    },
}

fn set_jobs(jobs: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(anyhow::anyhow!("thread pool: {e}")))?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            jobs,
            dry_run,
        } => {
            set_jobs(jobs)?;
            commands::cmd_run(&config, dry_run)
        }
        Command::Reproduce { study, seeds, jobs } => {
            set_jobs(jobs)?;
            commands::cmd_reproduce(study, seeds)
        }
        Command::Eval { checkpoint, bas } => commands::cmd_eval(&checkpoint, &bas),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
