//! Command-line front end for the scheduling toolkit.

mod commands;
mod scenario;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "vertisync",
    version,
    about = "Cycle scheduling and simulation for air mobility networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one seed and write the trace, metrics and a summary.
    Run(commands::RunArgs),
    /// Enumerate service vectors, compute the throughput scale along a direction and sample membership.
    Region(commands::RegionArgs),
    /// Enumerate service vectors and write them as CSV.
    Enumerate(commands::EnumerateArgs),
    /// Mean peak travel time versus fleet size over several seeds.
    SweepFleet(commands::SweepArgs),
    /// Re-check a trace directory written by `run`.
    VerifyTrace(commands::VerifyArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => commands::run(&a),
        Command::Region(a) => commands::region(&a),
        Command::Enumerate(a) => commands::enumerate(&a),
        Command::SweepFleet(a) => commands::sweep_fleet(&a),
        Command::VerifyTrace(a) => commands::verify_trace(&a),
    };
    match outcome {
        Ok(status) => status,
        Err(e) => {
            eprintln!("{}", commands::error_record(&e));
            ExitCode::from(2)
        }
    }
}
