//! Command-line pipeline: simulate evidence, pool it into posterior skill,
//! evaluate upstream scores, and select validation groups.
//!
//! Exit codes: 0 success, 1 usage or I/O failure, 2 data validation failure,
//! 3 non-convergence under --strict-rhat.

mod commands;
mod errors;
mod io;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "skillpool",
    about = "Pools per-modality classifier evidence into posterior skill estimates",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset from the generative model.
    Simulate(commands::simulate::SimulateArgs),
    /// Run the pooling model's sampler over logit evidence and rank labels.
    Pool(commands::pool::PoolArgs),
    /// Score upstream model outputs against rank labels.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Select skill-ranked gamer groups and test future-rank correlation.
    Groups(commands::groups::GroupsArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are not usage errors.
            use clap::error::ErrorKind;
            let _ = err.print();
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Pool(args) => commands::pool::run(args),
        Command::Evaluate(args) => commands::evaluate::run(args),
        Command::Groups(args) => commands::groups::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
