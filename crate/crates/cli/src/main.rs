//! `vsnngp` command-line driver.
//!
//! Log verbosity follows `RUST_LOG` (e.g. `RUST_LOG=info`).

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Benchmark;
use config::{Overrides, RunConfig};
use error::CliResult;

#[derive(Parser, Debug)]
#[command(name = "vsnngp", version, about = "Bayesian variable selection with NNGP surrogates")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the sampler; writes chain.csv, summary.json and config.toml.
    Fit,
    /// Posterior mean predictions at new inputs, in the units of the target.
    Predict {
        #[arg(long)]
        chain: PathBuf,
        /// CSV with the training predictor columns (extra columns ignored).
        #[arg(long)]
        test: PathBuf,
        /// Defaults to <output_dir>/predictions.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Posterior inclusion probability of each predictor.
    Importance {
        #[arg(long)]
        chain: PathBuf,
        /// Also write them as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthetic benchmark; writes metrics.json.
    Bench {
        #[arg(value_enum)]
        which: Benchmark,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = RunConfig::resolve(&cli.overrides)?;
    match cli.command {
        Command::Fit => commands::fit(&cfg),
        Command::Predict { chain, test, out } => commands::predict(&cfg, &chain, &test, out),
        Command::Importance { chain, out } => commands::importance(&cfg, &chain, out),
        Command::Bench { which } => commands::bench(&cfg, which),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
