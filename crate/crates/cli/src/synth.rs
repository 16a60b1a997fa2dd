//! The `synth` subcommand: simulate swaps against a reference
//! constant-product pool and emit labeled fine-tuning rows.

use std::path::PathBuf;

use clap::Args;
use pricescope_core::amm::{
    emit_finetune_jsonl, emit_finetune_split, generate_finetune_pairs, CpmmPool,
    PriceDirectionLabel, SynthContext,
};
use pricescope_core::primitives::{Address, TokenAmount};

use crate::{EXIT_CLEAN, EXIT_FATAL, EXIT_USAGE};

const DEFAULT_TEMPLATE: &str = include_str!("../../../templates/finetune.txt");
const DEFAULT_CODE: &str = include_str!("../data/cpmm_price.sol");

#[derive(Args)]
pub struct SynthArgs {
    /// Rows to generate; half push the first token in, half the second.
    #[arg(long, default_value_t = 1000)]
    count: usize,

    /// Generator seed: the same seed reproduces the output byte for byte.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Smallest simulated input amount, in base units.
    #[arg(long, value_name = "AMOUNT", default_value = "100000000000000000000")]
    lo: String,

    /// Largest simulated input amount, in base units.
    #[arg(long, value_name = "AMOUNT", default_value = "1000000000000000000000")]
    hi: String,

    /// Output JSONL path.
    #[arg(long, value_name = "PATH", default_value = "finetune.jsonl")]
    out: PathBuf,

    /// Also write an 83/17 train/validation split alongside --out.
    #[arg(long)]
    split: bool,

    /// Price-code snippet for the prompt (default: built-in
    /// constant-product reader).
    #[arg(long, value_name = "PATH")]
    code: Option<PathBuf>,

    /// Prompt template with an ===ANSWER=== separator (default: built-in).
    #[arg(long, value_name = "PATH")]
    template: Option<PathBuf>,
}

fn reference_pool() -> CpmmPool {
    CpmmPool {
        address: Address([0xcc; 20]),
        tokens: [Address([0xa1; 20]), Address([0xa2; 20])],
        reserves: [
            TokenAmount::from_u128(10u128.pow(24)),
            TokenAmount::from_u128(10u128.pow(24)),
        ],
        fee_bps: 30,
    }
}

fn parse_amount(name: &str, text: &str) -> Result<TokenAmount, String> {
    text.parse::<TokenAmount>()
        .map_err(|e| format!("--{name}: `{text}` is not a valid amount ({e})"))
}

pub fn run(args: SynthArgs) -> i32 {
    let lo = match parse_amount("lo", &args.lo) {
        Ok(v) => v,
        Err(msg) => {
            eprintln!("pricescope: {msg}");
            return EXIT_USAGE;
        }
    };
    let hi = match parse_amount("hi", &args.hi) {
        Ok(v) => v,
        Err(msg) => {
            eprintln!("pricescope: {msg}");
            return EXIT_USAGE;
        }
    };

    let read = |path: &PathBuf| -> Result<String, String> {
        std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
    };
    let code = match args.code.as_ref().map(read).transpose() {
        Ok(text) => text.unwrap_or_else(|| DEFAULT_CODE.to_string()),
        Err(msg) => {
            eprintln!("pricescope: {msg}");
            return EXIT_FATAL;
        }
    };
    let template = match args.template.as_ref().map(read).transpose() {
        Ok(text) => text.unwrap_or_else(|| DEFAULT_TEMPLATE.to_string()),
        Err(msg) => {
            eprintln!("pricescope: {msg}");
            return EXIT_FATAL;
        }
    };

    let pool = reference_pool();
    let pairs = match generate_finetune_pairs(&pool, args.count, args.seed, &lo, &hi) {
        Ok(pairs) => pairs,
        Err(e) => {
            eprintln!("pricescope: {e}");
            return EXIT_USAGE;
        }
    };

    let ctx = SynthContext {
        template: &template,
        code: &code,
        token_0: "TK0",
        token_1: "TK1",
        pool_name: "the pool",
    };

    let up = pairs
        .iter()
        .filter(|p| p.direction == PriceDirectionLabel::Inflate)
        .count();
    let result = if args.split {
        let train = args.out.with_extension("train.jsonl");
        let valid = args.out.with_extension("valid.jsonl");
        emit_finetune_split(&pairs, &ctx, &train, &valid).map(|(t, v)| {
            eprintln!(
                "wrote {t} training and {v} validation rows to {} and {}",
                train.display(),
                valid.display()
            );
        })
    } else {
        emit_finetune_jsonl(&pairs, &ctx, &args.out).map(|()| {
            eprintln!(
                "wrote {} rows ({} price-up, {} price-down) to {}",
                pairs.len(),
                up,
                pairs.len() - up,
                args.out.display()
            );
        })
    };
    match result {
        Ok(()) => EXIT_CLEAN,
        Err(e) => {
            eprintln!("pricescope: {e}");
            EXIT_FATAL
        }
    }
}
