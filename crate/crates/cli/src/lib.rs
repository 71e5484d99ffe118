//! Batch front end: run scenarios, resolve billing records, size pools.
//!
//! Everything is file-in/file-out — the simulator has no interactive mode.
//! Exit codes are part of the interface: 0 for a clean run, 1 when an
//! invariant tripped, 2 for configuration or input errors.

pub mod billing;
pub mod runner;
pub mod sizing;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "pseudoaka", version, about = "Pseudonym-AKA scenario runner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Execute a scenario and write trace / report / allocation-log files.
    Run(runner::RunArgs),
    /// Resolve the service records in a trace against an allocation log.
    Billing(billing::BillingArgs),
    /// Pool-occupancy arithmetic: expected allocation tries and footprint.
    Sizing(sizing::SizingArgs),
}

/// Verbosity from PSEUDOAKA_LOG: 0 quiet, 1 normal, 2 debug.
pub fn verbosity() -> u8 {
    match std::env::var("PSEUDOAKA_LOG").as_deref() {
        Ok("quiet") | Ok("0") | Ok("off") => 0,
        Ok("debug") | Ok("2") => 2,
        _ => 1,
    }
}

pub fn execute(cli: Cli) -> i32 {
    match cli.command {
        Command::Run(args) => runner::cmd_run(&args),
        Command::Billing(args) => billing::cmd_billing(&args),
        Command::Sizing(args) => sizing::cmd_sizing(&args),
    }
}
