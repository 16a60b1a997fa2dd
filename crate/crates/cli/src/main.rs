//! Command-line front end: scan transactions for price-manipulation
//! patterns, synthesize fine-tuning data, freeze live traces into fixture
//! files, and pretty-print saved reports.

use std::path::PathBuf;
use std::process::exit;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

mod config;
mod freeze;
mod report;
mod scan;
mod synth;

/// Nothing suspicious found.
pub const EXIT_CLEAN: i32 = 0;
/// The scan itself failed (unreadable input, fetch failure, bad config).
pub const EXIT_FATAL: i32 = 1;
/// The scan completed and produced findings.
pub const EXIT_FINDINGS: i32 = 2;
/// Command line did not parse or named an impossible combination.
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser)]
#[command(
    name = "pricescope",
    version,
    about = "Detects price-manipulation attack patterns in EVM transactions"
)]
struct Cli {
    /// Configuration file (default: ./pricescope.toml when present).
    /// Command-line flags override environment variables, which override
    /// this file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan one transaction, or a directory of fixtures, for manipulation
    /// patterns.
    Scan(scan::ScanArgs),
    /// Simulate pool swaps and emit chat-format fine-tuning rows.
    Synth(synth::SynthArgs),
    /// Fetch a live transaction trace over RPC and save it as a fixture.
    Freeze(freeze::FreezeArgs),
    /// Pretty-print a report produced by `scan`.
    Report(report::ReportArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_CLEAN,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            exit(code);
        }
    };
    let file_cfg = match config::FileConfig::load(cli.config.as_deref()) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("pricescope: {msg}");
            exit(EXIT_FATAL);
        }
    };
    let code = match cli.command {
        Command::Scan(args) => scan::run(args, &file_cfg),
        Command::Synth(args) => synth::run(args),
        Command::Freeze(args) => freeze::run(args, &file_cfg),
        Command::Report(args) => report::run(args),
    };
    exit(code);
}
