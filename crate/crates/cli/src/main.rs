//! `bfsurprise` command-line driver.

mod commands;
mod spec;

use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spec::Flags;

#[derive(Debug, Parser)]
#[command(name = "bfsurprise", version, about = "Surprise-modulated learners in change-point environments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write environment traces, and estimator traces for `--algorithms`.
    Simulate(Flags),
    /// Grid-search each learner's parameter on every cell.
    Tune(Flags),
    /// Compare learners with exact inference on every cell.
    Benchmark(Flags),
    /// Regret of learners tuned at each `--pc` across change probabilities.
    Robustness(Flags),
    /// Surprise tables of the two experimental predictions.
    Predict(Flags),
}

/// Bad input from the command line or a file it names.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numeric(String),
    Other(anyhow::Error),
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e.0)
    }
}

impl From<bfsurprise::Error> for Failure {
    fn from(e: bfsurprise::Error) -> Self {
        use bfsurprise::Error as E;
        match e {
            E::Numeric(_) => Failure::Numeric(e.to_string()),
            E::InvalidModel(_) | E::InvalidObservation(_) | E::InvalidParameter(_) | E::Unsupported(_) => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Other(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Simulate(f) => commands::simulate(f),
        Command::Tune(f) => commands::tune(f),
        Command::Benchmark(f) => commands::benchmark(f),
        Command::Robustness(f) => commands::robustness(f),
        Command::Predict(f) => commands::predict(f),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
