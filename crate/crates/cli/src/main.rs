use std::path::PathBuf;
use std::process::ExitCode;

use cdrkit::experiment::{self, ExperimentConfig, RunOptions};
use cdrkit::CdrError;
use clap::{Parser, Subcommand};

/// Clifford data regression experiments on built-in simulators.
#[derive(Parser)]
#[command(name = "cdrkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its result files.
    Run {
        config: PathBuf,
        /// Override the master seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long, env = "CDRKIT_WORKERS")]
        workers: Option<usize>,
        /// Output directory (default: the config's `output`, else ./results).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare relative errors across result directories.
    Compare {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(command: Command) -> Result<(), CdrError> {
    match command {
        Command::Run {
            config,
            seed,
            workers,
            out,
        } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let (results, dir) = experiment::run(&cfg, &RunOptions { seed, workers, out })?;
            println!("{} records written to {}", results.records.len(), dir.display());
            for row in &results.summary {
                let n = row.n_non_clifford.map(|n| format!(" N={n}")).unwrap_or_default();
                println!(
                    "{:<18}{:<6} mean relative error {:.4e}  max {:.4e}  ({} instances)",
                    row.method, n, row.mean_relative_error, row.max_relative_error, row.count
                );
            }
            Ok(())
        }
        Command::Compare { dirs } => {
            print!("{}", experiment::compare(&dirs)?.to_table());
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            cfg.validate()?;
            println!("{}: valid {} config", config.display(), cfg.kind.name());
            Ok(())
        }
    }
}
