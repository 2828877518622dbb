//! Command-line toolkit: estimate AUROC from trial CSVs, generate
//! synthetic cohorts, run the replicated sweeps and power analyses, and
//! rank models with misselection flags.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3
//! degenerate-estimation error.

pub mod commands;
pub mod config;
pub mod io;

use std::ffi::OsString;

use clap::Parser;
use rct_auroc::EvalError;

/// CLI failure carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub exit_code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { exit_code: 1, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { exit_code: 2, message: message.into() }
    }

    pub fn degenerate(message: impl Into<String>) -> Self {
        Self { exit_code: 3, message: message.into() }
    }

    pub fn from_eval(e: EvalError) -> Self {
        if e.is_degenerate() {
            Self::degenerate(e.to_string())
        } else {
            Self::data(e.to_string())
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}

/// Parse and dispatch. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match commands::Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own usage/help/version output; help and
            // version requests are successes.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.exit_code
        }
    }
}
