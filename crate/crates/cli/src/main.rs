//! `skykey`: batch front end for ingesting receiver logs, estimating
//! per-block secret-key rates and reporting them.

mod analyze;
mod config;
mod error;
mod ingest;
mod report;
mod selftest;
mod simulate;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ConfigArgs, PipelineArgs};
use error::{CliError, EXIT_USAGE};

#[derive(Parser)]
#[command(name = "skykey", version, about = "Secret-key rates from GNSS carrier-phase observations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode UBX logs into observation and geometry CSVs.
    Ingest {
        #[command(flatten)]
        common: ConfigArgs,
    },
    /// Run the block pipeline and write per-block key rates.
    Analyze {
        #[command(flatten)]
        common: ConfigArgs,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Criteria tables, availability, distributions and sky plots.
    Report(report::ReportArgs),
    /// Write a synthetic scenario with known ground truth.
    Simulate(simulate::SimulateArgs),
    /// Run the built-in check battery.
    Selftest(selftest::SelftestArgs),
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Ingest { common } => ingest::run(&common),
        Command::Analyze { common, pipeline } => analyze::run(&common, &pipeline),
        Command::Report(args) => report::run(&args),
        Command::Simulate(args) => simulate::run(&args),
        Command::Selftest(args) => selftest::run(&args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("skykey: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
