//! `robfolio`: rolling-window backtests, efficient frontiers and
//! uncertainty-set validation for nominal and robust portfolio models.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 every
//! optimization of a model failed, 1 anything else (output I/O).

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::RunFlags;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("solve failure: {0}")]
    Solve(String),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Solve(_) => 4,
            CliError::Output(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "robfolio", version, about = "Nominal and robust portfolio selection backtests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rolling-window backtest of every selected model, with metrics and validation.
    Backtest(RunFlags),
    /// Efficient frontier of one model on one in-sample window.
    Frontier {
        #[command(flatten)]
        flags: RunFlags,
        /// First row of the window; the window spans `horizon` rows.
        #[arg(long, default_value_t = 0)]
        start: usize,
    },
    /// Score robust models of one report against nominal models of another.
    Validate {
        /// Report holding the robust models.
        #[arg(long)]
        robust: PathBuf,
        /// Report holding the nominal counterparts.
        #[arg(long)]
        nominal: PathBuf,
        /// Returns CSV to use instead of the path recorded in the reports.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic returns panel.
    Synth {
        #[arg(long, default_value_t = 3024)]
        rows: usize,
        #[arg(long, default_value_t = 5)]
        assets: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fill every cell with this value instead of Gaussian draws.
        #[arg(long, allow_negative_numbers = true)]
        constant: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Backtest(flags) => flags.resolve().and_then(|cfg| commands::backtest(&cfg)),
        Command::Frontier { flags, start } => flags.resolve().and_then(|cfg| commands::frontier(&cfg, start)),
        Command::Validate {
            robust,
            nominal,
            input,
            out,
        } => commands::validate(&robust, &nominal, input.as_deref(), &out),
        Command::Synth {
            rows,
            assets,
            seed,
            constant,
            out,
        } => commands::synth(rows, assets, seed, constant, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("robfolio: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
