//! The `freeze` subcommand: fetch a transaction trace over RPC once and
//! save it as a fixture file for offline re-scanning.

use std::path::PathBuf;

use clap::Args;
use pricescope_core::ingest::{fetch_trace, save_trace, RpcConfig};
use pricescope_core::primitives::Word;

use crate::config::{resolve_rpc_url, FileConfig};
use crate::{EXIT_CLEAN, EXIT_FATAL, EXIT_USAGE};

#[derive(Args)]
pub struct FreezeArgs {
    /// Transaction hash to fetch and freeze.
    #[arg(long, value_name = "HASH")]
    tx: String,

    /// JSON-RPC endpoint with debug tracing (or PRICESCOPE_RPC_URL, or
    /// rpc_url in the config file).
    #[arg(long, value_name = "URL")]
    rpc: Option<String>,

    /// Fixture path to write (default: `<tx>.json` in the current
    /// directory). Written atomically.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

pub fn run(args: FreezeArgs, file_cfg: &FileConfig) -> i32 {
    let Some(url) = resolve_rpc_url(args.rpc.as_deref(), file_cfg) else {
        eprintln!(
            "pricescope: no RPC endpoint: pass --rpc, set PRICESCOPE_RPC_URL, or set rpc_url in pricescope.toml"
        );
        return EXIT_USAGE;
    };
    let hash: Word = match args.tx.parse() {
        Ok(hash) => hash,
        Err(e) => {
            eprintln!("pricescope: bad transaction hash: {e}");
            return EXIT_USAGE;
        }
    };

    let input = match fetch_trace(&RpcConfig::new(url), hash) {
        Ok(input) => input,
        Err(e) => {
            eprintln!("pricescope: {e}");
            return EXIT_FATAL;
        }
    };

    let out = args.out.unwrap_or_else(|| PathBuf::from(format!("{hash}.json")));
    if let Err(e) = save_trace(&out, &input) {
        eprintln!("pricescope: {e}");
        return EXIT_FATAL;
    }
    println!("{}", out.display());
    EXIT_CLEAN
}
