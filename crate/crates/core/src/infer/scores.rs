//! Parsing scoring-model replies and resolving scored statement pairs into
//! price-change verdicts.

use super::{InferError, PriceChangeVerdict, PriceStatement, VerdictBackend};
use std::collections::BTreeMap;

/// One statement with the score its backend assigned.
#[derive(Debug, Clone)]
pub struct ScoredStatement {
    pub statement: PriceStatement,
    pub score: u8,
}

fn clamp_score(raw: i64, which: usize, warnings: &mut Vec<String>) -> u8 {
    if (1..=10).contains(&raw) {
        raw as u8
    } else {
        let clamped = raw.clamp(1, 10) as u8;
        warnings.push(format!(
            "score {raw} for statement {which} outside 1..=10, clamped to {clamped}"
        ));
        clamped
    }
}

/// Extracts `expected` scores from a model reply. Two shapes are accepted:
/// a JSON array of numbers (bare or under a `"scores"` key), or one
/// `"Statement N: <score>"` line per statement, matched by label so line
/// order does not matter. Out-of-range scores clamp to 1..=10 with a
/// warning; a missing score is an error.
pub fn parse_scores(
    response: &str,
    expected: usize,
) -> Result<(Vec<u8>, Vec<String>), InferError> {
    let mut warnings = Vec::new();

    if let Ok(v) = serde_json::from_str::<serde_json::Value>(response.trim()) {
        let arr = v
            .as_array()
            .cloned()
            .or_else(|| v.get("scores").and_then(|s| s.as_array()).cloned());
        if let Some(arr) = arr {
            if arr.len() < expected {
                return Err(InferError::UnparseableResponse(format!(
                    "json carries {} scores, expected {expected}",
                    arr.len()
                )));
            }
            let mut out = Vec::with_capacity(expected);
            for (i, item) in arr.iter().take(expected).enumerate() {
                let raw = item.as_i64().ok_or_else(|| {
                    InferError::UnparseableResponse(format!("json score {} is not an integer", i + 1))
                })?;
                out.push(clamp_score(raw, i + 1, &mut warnings));
            }
            return Ok((out, warnings));
        }
    }

    let lowered = response.to_ascii_lowercase();
    let mut out = Vec::with_capacity(expected);
    for i in 1..=expected {
        let label = format!("statement {i}:");
        let Some(pos) = lowered.find(&label) else {
            return Err(InferError::UnparseableResponse(format!(
                "no `Statement {i}:` line in reply"
            )));
        };
        let rest = &response[pos + label.len()..];
        let trimmed = rest.trim_start();
        let digits: String = trimmed
            .chars()
            .take_while(|c| c.is_ascii_digit() || *c == '-')
            .collect();
        let raw: i64 = digits.parse().map_err(|_| {
            InferError::UnparseableResponse(format!("`Statement {i}:` is not followed by a number"))
        })?;
        out.push(clamp_score(raw, i, &mut warnings));
    }
    Ok((out, warnings))
}

/// Pairs each scored statement with its opposite over the same
/// (token, contract) and keeps the strictly higher side as a verdict with
/// the winning score as confidence. Ties produce no verdict: the model
/// could not tell the directions apart.
pub fn resolve_verdicts(
    statements: &[PriceStatement],
    scores: &[u8],
    backend: VerdictBackend,
    invocation: usize,
) -> Result<Vec<PriceChangeVerdict>, InferError> {
    if statements.len() != scores.len() {
        return Err(InferError::UnparseableResponse(format!(
            "{} statements but {} scores",
            statements.len(),
            scores.len()
        )));
    }
    let mut by_pair: BTreeMap<(crate::primitives::Address, crate::primitives::Address), Vec<ScoredStatement>> =
        BTreeMap::new();
    for (s, &score) in statements.iter().zip(scores) {
        by_pair
            .entry((s.token, s.contract))
            .or_default()
            .push(ScoredStatement {
                statement: s.clone(),
                score,
            });
    }

    let mut out = Vec::new();
    for ((token, contract), group) in by_pair {
        let best_inc = group
            .iter()
            .filter(|g| g.statement.direction == super::PriceDirection::Increase)
            .map(|g| g.score)
            .max();
        let best_dec = group
            .iter()
            .filter(|g| g.statement.direction == super::PriceDirection::Decrease)
            .map(|g| g.score)
            .max();
        let (Some(inc), Some(dec)) = (best_inc, best_dec) else {
            continue; // unpaired statement: nothing to compare against
        };
        if inc == dec {
            continue;
        }
        let (direction, confidence) = if inc > dec {
            (super::PriceDirection::Increase, inc)
        } else {
            (super::PriceDirection::Decrease, dec)
        };
        out.push(PriceChangeVerdict {
            token,
            contract,
            direction,
            confidence,
            backend,
            invocation,
        });
    }
    Ok(out)
}
