#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{Config, COMMANDS};

/// Batch driver for mixed local-nonlocal Hardy experiments.
#[derive(Debug, Parser)]
#[command(name = "mlnhardy", version)]
struct Cli {
    /// One of: solve, iterate, constant, scaling, probe-solvability, sweep, verify
    command: String,
    /// JSON experiment configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: `output` from the config, else `.`)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads; falls back to MLNHARDY_THREADS
    #[arg(long)]
    threads: Option<usize>,
}

const VALIDATION: u8 = 1;
const NUMERICAL: u8 = 2;

fn usage() -> String {
    format!(
        "usage: mlnhardy <command> --config <path> [--output <dir>] [--threads <k>]\ncommands: {}",
        COMMANDS.join(", ")
    )
}

fn threads(cli: &Cli) -> Result<Option<usize>, String> {
    if let Some(k) = cli.threads {
        return Ok(Some(k));
    }
    match std::env::var("MLNHARDY_THREADS") {
        Ok(v) => {
            v.trim().parse().map(Some).map_err(|_| format!("MLNHARDY_THREADS must be a positive integer, got `{v}`"))
        }
        Err(_) => Ok(None),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            eprintln!("{}", usage());
            return ExitCode::from(VALIDATION);
        }
    };
    if !COMMANDS.contains(&cli.command.as_str()) {
        eprintln!("error: unknown command `{}`", cli.command);
        eprintln!("{}", usage());
        return ExitCode::from(VALIDATION);
    }
    match threads(&cli) {
        Ok(Some(0)) | Err(_) => {
            eprintln!("error: thread count must be a positive integer");
            return ExitCode::from(VALIDATION);
        }
        Ok(Some(k)) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
                eprintln!("error: {e}");
                return ExitCode::from(VALIDATION);
            }
        }
        Ok(None) => {}
    }
    let config = match Config::load(&cli.config, &cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(VALIDATION);
        }
    };
    let dir = cli.output.clone().or_else(|| config.output.as_ref().map(PathBuf::from)).unwrap_or_else(|| ".".into());
    let outcome = match commands::run(&config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(if e.is_numerical() { NUMERICAL } else { VALIDATION });
        }
    };
    if let Err(e) = commands::write_outputs(&dir, &config, &outcome) {
        eprintln!("error: {e}");
        return ExitCode::from(VALIDATION);
    }
    println!("{}: {}", config.command, outcome.summary);
    if outcome.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(NUMERICAL)
    }
}
