//! Scenario runner binary.
//!
//! `agrofin --config scenario.toml --out reports --command all`
//!
//! Exit codes: 0 success, 2 config error, 3 runtime error. Reports are
//! written only after the whole command has succeeded.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use agrofin_cli::commands::{self, CliError, Command};
use agrofin_cli::config::{self, ConfigError};

/// Farm finance scenario runner.
#[derive(Debug, Parser)]
#[command(name = "agrofin")]
struct Args {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Directory the reports are written into.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// What to run.
    #[arg(long, value_enum)]
    command: Command,
    /// Overrides the seed in the scenario file.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the Monte Carlo sample count in the scenario file.
    #[arg(long)]
    mc_n: Option<u64>,
}

fn run(args: &Args) -> Result<usize, CliError> {
    let mut bundle = config::load(&args.config)?;
    if let Some(seed) = args.seed {
        bundle.seed = seed;
    }
    if let Some(n) = args.mc_n {
        if n == 0 {
            return Err(CliError::Config(ConfigError::Invalid {
                path: "--mc-n".to_owned(),
                message: "must be positive".to_owned(),
            }));
        }
        bundle.monte_carlo_n = n;
    }
    let reports = commands::run(args.command, &bundle)?;
    reports.write_to(&args.out)?;
    Ok(reports.len())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(count) => {
            println!("{count} reports written to {}", args.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
