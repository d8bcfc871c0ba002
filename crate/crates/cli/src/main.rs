//! `mincr` command-line interface. Exit codes: 0 success, 1 computation
//! failure, 2 usage error.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;
use crate::commands::{run, CliError, Status};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::Incomplete(msg)) => {
            eprintln!("mincr: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("mincr: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Compute(e)) => {
            eprintln!("mincr: {e:#}");
            ExitCode::from(1)
        }
    }
}
