//! `gridloss` command-line tool.
//!
//! Exit codes: 0 success, 64 usage error, 65 invalid model (disconnected
//! graph, non-PSD covariance, zero total variance, ...), 66 unreadable or
//! malformed input file.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::Cli;

pub const EXIT_USAGE: u8 = 64;
pub const EXIT_DOMAIN: u8 = 65;
pub const EXIT_INPUT: u8 = 66;

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core(gridloss::Error),
    Output(String),
}

impl From<gridloss::Error> for Failure {
    fn from(e: gridloss::Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Core(e) if e.is_input_error() => EXIT_INPUT,
            Failure::Core(_) => EXIT_DOMAIN,
            Failure::Output(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Output(m) => write!(f, "cannot write output: {m}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("gridloss: cannot configure thread pool: {e}");
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("gridloss: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
