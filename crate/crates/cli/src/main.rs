//! `gdla` command-line front end.
//!
//! Exit codes: 0 success, 1 a suite case failed, 2 usage error, 3 I/O
//! failure, 4 numeric or configuration error.

mod args;
mod commands;
mod error;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use error::CliError;

/// Reproducible output assumes IEEE-754 binary64 with round-to-nearest and
/// gradual underflow.
fn check_fp_environment() -> Result<(), CliError> {
    let third = std::hint::black_box(1.0f64) / std::hint::black_box(3.0);
    let tiny = std::hint::black_box(f64::MIN_POSITIVE) / std::hint::black_box(4.0);
    let sum = std::hint::black_box(0.1f64) + std::hint::black_box(0.2);
    if third.to_bits() != 0x3FD5_5555_5555_5555
        || tiny == 0.0
        || sum.to_bits() != 0x3FD3_3333_3333_3334
    {
        return Err(CliError::Numeric(
            "floating-point environment is not IEEE round-to-nearest with subnormals".into(),
        ));
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    check_fp_environment()?;
    let out = cli.out_dir();
    match &cli.command {
        Command::Equiv(a) => commands::run_equiv(a, &out),
        Command::Gradcheck(a) => commands::run_gradcheck(a, &out),
        Command::Diag(a) => commands::run_diag(a, &out),
        Command::Bench(a) => commands::run_bench(a, &out),
        Command::Ffncheck(a) => commands::run_ffncheck(a, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gdla: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
