mod alloc;
mod cost;
mod io;
mod model;
mod pack;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Packing of low-precision multiplications into wide DSP multipliers,
/// lookup tables, network cost and pipeline resource allocation.
///
/// Exit status: 0 on success, 1 on a domain failure (no packing,
/// verification mismatch, infeasible allocation, missing table entry),
/// 2 on usage or schema errors.
#[derive(Debug, Parser)]
#[command(name = "mixpack", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Search, tabulate and verify packings.
    #[command(subcommand)]
    Pack(pack::PackCommand),
    /// Network-level operation counts.
    #[command(subcommand)]
    Model(model::ModelCommand),
    /// Stage cost samples and regression models.
    #[command(subcommand)]
    Cost(cost::CostCommand),
    /// Pipeline resource allocation.
    #[command(subcommand)]
    Alloc(alloc::AllocCommand),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Pack(c) => pack::run(c),
        Command::Model(c) => model::run(c),
        Command::Cost(c) => cost::run(c),
        Command::Alloc(c) => alloc::run(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(io::exit_code(&e))
        }
    }
}
