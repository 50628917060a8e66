//! `nrdetect`: curve data for noise-radar detection.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage or domain error,
//! 3 numerical failure.

mod args;
mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};

/// Errors that decide the exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(nrdetect::Error),
    Io(anyhow::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
            CliError::Io(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<nrdetect::Error> for CliError {
    fn from(e: nrdetect::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    let argv = match config::merge_config(raw) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("nrdetect: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Pdf(a) => commands::pdf(a),
        Command::Roc(a) => commands::roc(a),
        Command::SweepKappa(a) => commands::sweep_kappa(a),
        Command::Range(a) => commands::range(a),
        Command::Validate(a) => commands::validate(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("nrdetect: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
