//! Prompt assembly for the two scoring-model request shapes.

use super::{ChangeDescription, InferError, PriceStatement};
use crate::primitives::{Address, TokenRegistry};
use crate::template;

fn render_statements(statements: &[PriceStatement]) -> String {
    statements
        .iter()
        .enumerate()
        .map(|(i, s)| format!("Statement {}: {}", i + 1, s.text))
        .collect::<Vec<_>>()
        .join("\n")
}

fn render_changes(changes: &[ChangeDescription]) -> String {
    if changes.is_empty() {
        return "(none)".to_string();
    }
    changes
        .iter()
        .map(|c| format!("- {}", c.text))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Builds a prompt around a contract's own price-calculation code.
/// The template must carry `{code}`, `{changes}`, and `{statements}`.
pub fn build_prompt_type1(
    code: &str,
    statements: &[PriceStatement],
    changes: &[ChangeDescription],
    template: &str,
) -> Result<String, InferError> {
    if code.trim().is_empty() {
        return Err(InferError::NoCode);
    }
    if statements.is_empty() {
        return Err(InferError::NoStatements);
    }
    template::require(template, &["code", "changes", "statements"])?;
    let mut text = template::fill_all(template, "code", code.trim_end())?;
    text = template::fill_all(&text, "changes", &render_changes(changes))?;
    text = template::fill_all(&text, "statements", &render_statements(statements))?;
    Ok(text)
}

/// Builds a prompt for a two-token pool with no usable source, describing
/// the pool as a constant-product market instead of quoting code. The
/// template must carry `{pool_name}`, `{token_0}`, `{token_1}`,
/// `{changes}`, and `{statements}`.
pub fn build_prompt_type2(
    pool: Address,
    tokens: &[Address],
    statements: &[PriceStatement],
    changes: &[ChangeDescription],
    registry: &TokenRegistry,
    template: &str,
) -> Result<String, InferError> {
    if tokens.len() != 2 {
        return Err(InferError::NotTwoToken {
            pool,
            count: tokens.len(),
        });
    }
    if statements.is_empty() {
        return Err(InferError::NoStatements);
    }
    template::require(
        template,
        &["pool_name", "token_0", "token_1", "changes", "statements"],
    )?;
    let mut text = template::fill_all(template, "pool_name", &registry.name(&pool))?;
    text = template::fill_all(&text, "token_0", &registry.name(&tokens[0]))?;
    text = template::fill_all(&text, "token_1", &registry.name(&tokens[1]))?;
    text = template::fill_all(&text, "changes", &render_changes(changes))?;
    text = template::fill_all(&text, "statements", &render_statements(statements))?;
    Ok(text)
}
