//! Fine-tuning data synthesis: simulate swaps against a constant-product
//! pool, record the pool's balance changes as signed pairs, and render them
//! through the chat prompt template into JSONL training rows.

use std::path::{Path, PathBuf};

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_traits::Signed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{cpmm_spot_price, cpmm_swap_exact_in, AmmError, CpmmPool};
use crate::ingest::atomic_write;
use crate::primitives::TokenAmount;
use crate::template::{self, TemplateError};

/// Marker line separating the prompt half of the fine-tuning template from
/// the expected answer half.
pub const ANSWER_MARKER: &str = "===ANSWER===";

/// Score given to the statement the constant-product model agrees with.
pub const CONSISTENT_SCORE: u8 = 9;
/// Score given to its negation.
pub const CONTRADICTED_SCORE: u8 = 2;

/// Trend of the second token's price over the simulated swap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceDirectionLabel {
    Inflate,
    Deflate,
}

/// The pool's balance movement from one simulated swap, signed post-minus-pre,
/// labeled with the direction the second token's price moved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BalancePair {
    pub delta_x: BigInt,
    pub delta_y: BigInt,
    pub direction: PriceDirectionLabel,
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("template has no {ANSWER_MARKER} line separating prompt from answer")]
    NoAnswerMarker,
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Simulates `count` swaps (half pushing the first token in, half the
/// second) against fresh copies of `pool`, with input amounts drawn
/// uniformly from `[lo, hi]` by a seeded generator. Each pair records the
/// pool's two balance deltas; the direction label is derived from comparing
/// exact spot prices before and after, not from the swap orientation.
pub fn generate_finetune_pairs(
    pool: &CpmmPool,
    count: usize,
    seed: u64,
    lo: &TokenAmount,
    hi: &TokenAmount,
) -> Result<Vec<BalancePair>, AmmError> {
    if count == 0 || count % 2 != 0 {
        return Err(AmmError::BadPool(format!(
            "pair count must be even and positive, got {count}"
        )));
    }
    if lo >= hi {
        return Err(AmmError::BadPool("amount range is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hi_exclusive: BigUint = hi.as_biguint() + 1u32;
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let amount = rng.gen_biguint_range(lo.as_biguint(), &hi_exclusive);
        let amount = TokenAmount::from_biguint(amount).map_err(|_| AmmError::Overflow)?;
        let side = if k < count / 2 { 0 } else { 1 };
        let token_in = pool.tokens[side];
        let price_before = cpmm_spot_price(pool, 1)?;
        let (_, next) = cpmm_swap_exact_in(pool, token_in, &amount)?;
        let price_after = cpmm_spot_price(&next, 1)?;
        let delta_x = next.reserves[0].to_bigint() - pool.reserves[0].to_bigint();
        let delta_y = next.reserves[1].to_bigint() - pool.reserves[1].to_bigint();
        debug_assert!(delta_x.sign() != delta_y.sign());
        let direction = if price_after > price_before {
            PriceDirectionLabel::Inflate
        } else {
            PriceDirectionLabel::Deflate
        };
        out.push(BalancePair {
            delta_x,
            delta_y,
            direction,
        });
    }
    Ok(out)
}

/// Everything a pair needs besides its numbers to become a training row.
#[derive(Debug, Clone, Copy)]
pub struct SynthContext<'a> {
    /// Full template text: prompt, then the answer marker line, then answer.
    pub template: &'a str,
    /// Price-calculation source snippet substituted for `{code}`.
    pub code: &'a str,
    /// Display name substituted for `{token_0}` (the pool's first token).
    pub token_0: &'a str,
    /// Display name substituted for `{token_1}`.
    pub token_1: &'a str,
    /// Display name substituted for `{pool_name}`.
    pub pool_name: &'a str,
}

fn fill_if_present(text: String, name: &str, value: &str) -> Result<String, TemplateError> {
    if text.contains(&format!("{{{name}}}")) {
        template::fill_all(&text, name, value)
    } else {
        Ok(text)
    }
}

fn direction_word(v: &BigInt) -> &'static str {
    if v.is_positive() {
        "increases"
    } else {
        "decreases"
    }
}

/// Renders one pair to a chat-format JSON line.
///
/// The template must carry `{code}`, `{value_0}`, `{value_1}`, two
/// `{direction of change}` occurrences (first token's line first), and four
/// `{score}` occurrences matching the statement order: first token's price
/// up, first token's price down, second token's price up, second token's
/// price down. Values render as magnitudes; their signs live in the
/// direction words.
pub fn render_finetune_line(pair: &BalancePair, ctx: &SynthContext) -> Result<String, SynthError> {
    template::require(
        ctx.template,
        &["code", "value_0", "value_1", "direction of change", "score"],
    )?;

    let mut text = ctx.template.to_string();
    text = template::fill_all(&text, "code", ctx.code)?;
    text = fill_if_present(text, "pool_name", ctx.pool_name)?;
    text = fill_if_present(text, "token_0", ctx.token_0)?;
    text = fill_if_present(text, "token_1", ctx.token_1)?;
    text = template::fill_all(&text, "value_0", &pair.delta_x.magnitude().to_string())?;
    text = template::fill_all(&text, "value_1", &pair.delta_y.magnitude().to_string())?;
    text = template::fill_each(
        &text,
        "direction of change",
        &[
            direction_word(&pair.delta_x).to_string(),
            direction_word(&pair.delta_y).to_string(),
        ],
    )?;
    let (hi, lo) = (
        CONSISTENT_SCORE.to_string(),
        CONTRADICTED_SCORE.to_string(),
    );
    let scores = match pair.direction {
        // Second token's price up means the first token's price (its
        // reciprocal in the pair) moved down, and vice versa.
        PriceDirectionLabel::Inflate => [lo.clone(), hi.clone(), hi.clone(), lo.clone()],
        PriceDirectionLabel::Deflate => [hi.clone(), lo.clone(), lo.clone(), hi.clone()],
    };
    text = template::fill_each(&text, "score", &scores)?;

    let marker = format!("\n{ANSWER_MARKER}\n");
    let split_at = text.find(&marker).ok_or(SynthError::NoAnswerMarker)?;
    let prompt = text[..split_at].trim().to_string();
    let answer = text[split_at + marker.len()..].trim().to_string();

    let line = serde_json::json!({
        "messages": [
            {"role": "user", "content": prompt},
            {"role": "assistant", "content": answer},
        ]
    });
    Ok(serde_json::to_string(&line).expect("statically serializable"))
}

fn write_lines(lines: &[String], path: &Path) -> Result<(), SynthError> {
    let mut body = lines.join("\n");
    if !body.is_empty() {
        body.push('\n');
    }
    atomic_write(path, body.as_bytes()).map_err(|source| SynthError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes every pair as one JSONL row. An empty pair list writes an empty
/// file.
pub fn emit_finetune_jsonl(
    pairs: &[BalancePair],
    ctx: &SynthContext,
    path: &Path,
) -> Result<(), SynthError> {
    let lines = pairs
        .iter()
        .map(|p| render_finetune_line(p, ctx))
        .collect::<Result<Vec<_>, _>>()?;
    write_lines(&lines, path)
}

/// How many of `n` samples go to training under the 83%/17% split, rounding
/// half up.
pub fn train_split_count(n: usize) -> usize {
    (n * 83 + 50) / 100
}

/// Splits the rendered rows 83/17 into training and validation files, in
/// order (callers shuffle upstream if they need to).
pub fn emit_finetune_split(
    pairs: &[BalancePair],
    ctx: &SynthContext,
    train_path: &Path,
    valid_path: &Path,
) -> Result<(usize, usize), SynthError> {
    let lines = pairs
        .iter()
        .map(|p| render_finetune_line(p, ctx))
        .collect::<Result<Vec<_>, _>>()?;
    let cut = train_split_count(lines.len());
    write_lines(&lines[..cut], train_path)?;
    write_lines(&lines[cut..], valid_path)?;
    Ok((cut, lines.len() - cut))
}
