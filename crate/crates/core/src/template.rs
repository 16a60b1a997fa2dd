//! Plain-text prompt templating.
//!
//! Placeholders are written `{name}` (names may contain spaces). A template
//! can use the same placeholder several times; [`fill_each`] binds the i-th
//! occurrence to the i-th supplied value, which is how per-line directions and
//! per-statement scores are injected.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template is missing required placeholder {{{0}}}")]
    MissingPlaceholder(String),
    #[error("template has {found} occurrence(s) of {{{name}}} but {expected} value(s) were supplied")]
    CountMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
}

fn pattern(name: &str) -> String {
    format!("{{{name}}}")
}

/// Verifies that every named placeholder occurs at least once.
pub fn require(text: &str, names: &[&str]) -> Result<(), TemplateError> {
    for name in names {
        if !text.contains(&pattern(name)) {
            return Err(TemplateError::MissingPlaceholder((*name).to_string()));
        }
    }
    Ok(())
}

/// Replaces every occurrence of `{name}` with the same value. Errors when the
/// placeholder is absent. Scans left to right, so a value that happens to
/// contain placeholder syntax is never re-expanded.
pub fn fill_all(text: &str, name: &str, value: &str) -> Result<String, TemplateError> {
    let pat = pattern(name);
    if !text.contains(&pat) {
        return Err(TemplateError::MissingPlaceholder(name.to_string()));
    }
    let mut out = String::with_capacity(text.len() + value.len());
    let mut rest = text;
    while let Some(i) = rest.find(&pat) {
        out.push_str(&rest[..i]);
        out.push_str(value);
        rest = &rest[i + pat.len()..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Replaces the i-th occurrence of `{name}` with `values[i]`. The occurrence
/// count must match the value count exactly.
pub fn fill_each(text: &str, name: &str, values: &[String]) -> Result<String, TemplateError> {
    let pat = pattern(name);
    let found = text.matches(&pat).count();
    if found != values.len() {
        return Err(TemplateError::CountMismatch {
            name: name.to_string(),
            expected: values.len(),
            found,
        });
    }
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    for value in values {
        let i = rest.find(&pat).expect("occurrence counted above");
        out.push_str(&rest[..i]);
        out.push_str(value);
        rest = &rest[i + pat.len()..];
    }
    out.push_str(rest);
    Ok(out)
}
