//! `poolrank`: generate synthetic data, train, evaluate, ablate and sweep.
//!
//! Exit codes: 0 on success, 1 for usage or configuration errors, 2 for data
//! and runtime errors.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use poolrank::parallel::Workers;

use crate::config::RunFlags;

/// An error caused by the invocation or configuration rather than the data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(name = "poolrank", version, about = "Learning-to-rank toolkit with pooling-based listwise losses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic partial-relevance dataset and its ground-truth sidecar.
    Gen(commands::GenArgs),
    /// Train a scorer; writes the best checkpoint and the run record.
    Train {
        #[command(flatten)]
        flags: RunFlags,
        /// Also write per-epoch wall-clock times (not reproducible).
        #[arg(long)]
        wall_time: bool,
    },
    /// Evaluate a checkpoint on a LETOR file.
    Eval(commands::EvalArgs),
    /// Train and test every nonzero mask of the PoolRank weights.
    Ablate {
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Train and test PoolRank for each window size.
    Sweep {
        #[command(flatten)]
        flags: RunFlags,
    },
}

fn workers_from_env() -> anyhow::Result<Workers> {
    match std::env::var("LTR_THREADS") {
        Ok(v) if !v.trim().is_empty() => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| UsageError(format!("LTR_THREADS must be a non-negative integer, got {v:?}")))?;
            Ok(Workers::new(n))
        }
        _ => Ok(Workers::serial()),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let workers = workers_from_env()?;
    match &cli.command {
        Command::Gen(args) => commands::gen(args),
        Command::Train { flags, wall_time } => commands::train_cmd(flags, &workers, *wall_time),
        Command::Eval(args) => commands::eval_cmd(args, &workers),
        Command::Ablate { flags } => commands::ablate_cmd(flags, &workers),
        Command::Sweep { flags } => commands::sweep_cmd(flags, &workers),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<poolrank::Error>() {
        Some(poolrank::Error::Config(_)) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
