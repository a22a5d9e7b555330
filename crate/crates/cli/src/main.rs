use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use star_cli::{parse_config, run_batch, summarize, CliError, Overrides};

/// Terrain-aware stealthy multi-agent search experiments.
#[derive(Debug, Parser)]
#[command(name = "star", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every sweep cell of a config for several seeds and write CSVs.
    Run {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        /// Base seed; run r uses seed + r.
        #[arg(long)]
        seed: Option<u64>,
        /// star, guts, rsi, coverage or random (replaces the policy sweep).
        #[arg(long)]
        policy: Option<String>,
        #[arg(long)]
        runs: Option<usize>,
        /// full, none or drop(p) (replaces the comms sweep).
        #[arg(long)]
        comms: Option<String>,
        /// uniform or adversarial (replaces the placement sweep).
        #[arg(long)]
        placement: Option<String>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Print final recovery, penalty and pairwise differences from aggregates.
    Summarize {
        #[arg(required = true, value_name = "AGGREGATE")]
        files: Vec<PathBuf>,
    },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, seed, policy, runs, comms, placement, out } => {
            let mut spec = parse_config(&config)?;
            Overrides { seed, policy, runs, comms, placement, out }.apply(&mut spec)?;
            let output = run_batch(&spec)?;
            println!("wrote {} run files and {}", output.run_files.len(), output.aggregate.display());
        }
        Command::Summarize { files } => print!("{}", summarize(&files)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
