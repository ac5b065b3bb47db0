//! `covert`: distribution queries, budgets, rate sweeps and whitening checks.
//!
//! Every subcommand accepts `--config FILE` holding the matching block of
//! `schema/covert.schema.json`; flags override file values. Exit status is 0
//! when every check in the report passed, 1 when a check failed, 2 for
//! rejected input and 3 for failures after validation.

mod commands;
mod error;
mod schema;
mod store;

use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::commands::{BudgetArgs, DistArgs, Report, SweepArgs, WhitenArgs};
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "covert", version, about = "Covert communication under generalized Gaussian noise")]
struct Cli {
    /// Output format on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Density, distribution function, moments, entropy and samples of N_p(0, alpha^p).
    Dist(DistArgs),
    /// Output scale, divergence and rate caps for a covertness budget.
    Budget(BudgetArgs),
    /// Monte Carlo throughput over a list of blocklengths, persisted by run id.
    Sweep(SweepArgs),
    /// Whitening transport of Gaussian noise with memory and its equivalence checks.
    Whiten(WhitenArgs),
}

fn run(cli: &Cli) -> CliResult<Report> {
    match &cli.command {
        Command::Dist(a) => commands::dist(a),
        Command::Budget(a) => commands::budget(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Whiten(a) => commands::whiten_cmd(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            match cli.format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&report.json).expect("report serializes")),
                Format::Csv => print!("{}", report.csv),
            }
            if report.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("covert: one or more checks failed");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("covert: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
