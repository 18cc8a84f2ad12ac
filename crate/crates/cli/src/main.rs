//! `cv-kit`: batch front end for cvkit.
//!
//! Exit codes: 0 on success, 1 on a numerical failure (solver did not
//! converge, unattainable target, domain violation) or a property check that
//! did not come out as expected, 2 on a usage or configuration error.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use args::{CvArgs, EstimateArgs, EvalArgs, PanelArgs, VerifyArgs};

#[derive(Debug, Parser)]
#[command(name = "cv-kit", version, about = "Compensating variation for public-good provision changes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the utility and expenditure problems at one economy.
    Eval(EvalArgs),
    /// Run the homogeneity property checks that apply to a spec.
    Verify(VerifyArgs),
    /// Compensating variation for z1 -> t z1.
    Cv(CvArgs),
    /// Recover phi by regressing log changes on ln t.
    Estimate(EstimateArgs),
    /// Emit a synthetic provision-change panel as CSV.
    Panel(PanelArgs),
}

/// A failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<cvkit::Error> for Failure {
    fn from(e: cvkit::Error) -> Self {
        Self { code: if e.is_numerical() { 1 } else { 2 }, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self::usage(e.to_string())
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
        Command::Eval(a) => commands::eval(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Cv(a) => commands::cv(&a),
        Command::Estimate(a) => commands::estimate(&a),
        Command::Panel(a) => commands::panel(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("cv-kit: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
