//! Verified-source bundles and extraction of price-relevant functions.
//!
//! A bundle lives at `<bundles_dir>/<0xaddress>/` as a `metadata.json`
//! (`{"verified": bool}`) beside any number of `.sol` files. Extraction
//! walks every file in name order and keeps each function whose name
//! contains a price-flavored keyword, so a scoring prompt carries only the
//! code that can move a quote.

use super::InferError;
use crate::primitives::Address;
use std::fs;
use std::path::Path;

/// Function-name fragments that mark a function as price-relevant.
/// Matching is case-insensitive substring.
pub const PRICE_KEYWORDS: &[&str] = &[
    "price",
    "getPrice",
    "latestAnswer",
    "getReserves",
    "exchangeRate",
    "convertTo",
    "rate",
    "oracle",
];

/// One contract's source files plus its verification flag.
#[derive(Debug, Clone)]
pub struct SourceBundle {
    pub contract: Address,
    pub verified: bool,
    /// (file name, content), sorted by file name.
    pub files: Vec<(String, String)>,
}

/// Loads `<dir>/<address>/metadata.json` and the `.sol` files beside it.
/// A missing directory or metadata file means no bundle exists.
pub fn load_source_bundle(dir: &Path, contract: Address) -> Result<SourceBundle, InferError> {
    let bundle_dir = dir.join(contract.to_string());
    let meta_path = bundle_dir.join("metadata.json");
    if !meta_path.is_file() {
        return Err(InferError::NoSource(contract));
    }
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(&meta_path)?)
        .map_err(|e| InferError::UnparseableResponse(format!("metadata.json: {e}")))?;
    let verified = meta
        .get("verified")
        .and_then(serde_json::Value::as_bool)
        .unwrap_or(false);

    let mut files = Vec::new();
    for entry in fs::read_dir(&bundle_dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".sol") {
            files.push((name, fs::read_to_string(entry.path())?));
        }
    }
    files.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(SourceBundle {
        contract,
        verified,
        files,
    })
}

/// Pulls every function whose name matches one of `keywords` out of the
/// bundle, concatenated in source order and separated by blank lines.
/// Returns the empty string when nothing matches and an error when the
/// bundle is not verified (unverified code cannot be trusted in a prompt).
pub fn extract_price_functions(
    bundle: &SourceBundle,
    keywords: &[&str],
) -> Result<String, InferError> {
    if !bundle.verified {
        return Err(InferError::NoSource(bundle.contract));
    }
    let lowered: Vec<String> = keywords.iter().map(|k| k.to_ascii_lowercase()).collect();
    let mut out = String::new();
    for (_, content) in &bundle.files {
        for func in find_functions(content) {
            let name_lower = func.name.to_ascii_lowercase();
            if lowered.iter().any(|k| name_lower.contains(k)) {
                if !out.is_empty() {
                    out.push_str("\n\n");
                }
                out.push_str(func.text.trim_end());
            }
        }
    }
    Ok(out)
}

struct FoundFunction<'a> {
    name: &'a str,
    text: &'a str,
}

/// Scans Solidity-ish source for `function <name> ... { ... }` spans (or
/// `;`-terminated declarations), skipping comments and string literals so
/// braces inside them cannot derail the match.
fn find_functions(src: &str) -> Vec<FoundFunction<'_>> {
    let bytes = src.as_bytes();
    let mut found = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        match lexeme_at(bytes, i) {
            Lexeme::LineComment(end) | Lexeme::BlockComment(end) | Lexeme::Str(end) => {
                i = end;
            }
            Lexeme::Plain => {
                if src[i..].starts_with("function")
                    && boundary_before(bytes, i)
                    && boundary_after(bytes, i + "function".len())
                {
                    if let Some(f) = parse_function(src, i) {
                        let end = f.text.as_ptr() as usize - src.as_ptr() as usize + f.text.len();
                        found.push(f);
                        i = end;
                        continue;
                    }
                }
                i += 1;
            }
        }
    }
    found
}

enum Lexeme {
    LineComment(usize),
    BlockComment(usize),
    Str(usize),
    Plain,
}

fn lexeme_at(bytes: &[u8], i: usize) -> Lexeme {
    match bytes[i] {
        b'/' if bytes.get(i + 1) == Some(&b'/') => {
            let end = bytes[i..]
                .iter()
                .position(|&b| b == b'\n')
                .map_or(bytes.len(), |p| i + p + 1);
            Lexeme::LineComment(end)
        }
        b'/' if bytes.get(i + 1) == Some(&b'*') => {
            let end = bytes[i + 2..]
                .windows(2)
                .position(|w| w == b"*/")
                .map_or(bytes.len(), |p| i + 2 + p + 2);
            Lexeme::BlockComment(end)
        }
        q @ (b'"' | b'\'') => {
            let mut j = i + 1;
            while j < bytes.len() {
                match bytes[j] {
                    b'\\' => j += 2,
                    b if b == q => {
                        j += 1;
                        break;
                    }
                    _ => j += 1,
                }
            }
            Lexeme::Str(j.min(bytes.len()))
        }
        _ => Lexeme::Plain,
    }
}

fn boundary_before(bytes: &[u8], i: usize) -> bool {
    i == 0 || !is_ident(bytes[i - 1])
}

fn boundary_after(bytes: &[u8], i: usize) -> bool {
    bytes.get(i).is_none_or(|&b| !is_ident(b))
}

fn is_ident(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$'
}

fn parse_function(src: &str, start: usize) -> Option<FoundFunction<'_>> {
    let bytes = src.as_bytes();
    let mut i = start + "function".len();
    while i < bytes.len() && bytes[i].is_ascii_whitespace() {
        i += 1;
    }
    let name_start = i;
    while i < bytes.len() && is_ident(bytes[i]) {
        i += 1;
    }
    if i == name_start {
        return None;
    }
    let name = &src[name_start..i];

    // Walk to the body's opening brace or a declaration-ending semicolon,
    // then to the matching close brace.
    let mut depth = 0usize;
    while i < bytes.len() {
        match lexeme_at(bytes, i) {
            Lexeme::LineComment(end) | Lexeme::BlockComment(end) | Lexeme::Str(end) => i = end,
            Lexeme::Plain => {
                match bytes[i] {
                    b';' if depth == 0 => {
                        return Some(FoundFunction {
                            name,
                            text: &src[start..=i],
                        });
                    }
                    b'{' => depth += 1,
                    b'}' => {
                        depth -= 1;
                        if depth == 0 {
                            return Some(FoundFunction {
                                name,
                                text: &src[start..=i],
                            });
                        }
                    }
                    _ => {}
                }
                i += 1;
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn addr(n: u8) -> Address {
        Address([n; 20])
    }

    fn bundle(verified: bool, src: &str) -> SourceBundle {
        SourceBundle {
            contract: addr(5),
            verified,
            files: vec![("A.sol".into(), src.into())],
        }
    }

    const SAMPLE: &str = r#"
contract Oracle {
    uint256 reserve0;
    uint256 reserve1;

    function transfer(address to, uint256 v) external returns (bool) {
        // no closing brace in this string: "{"
        return true;
    }

    function getPrice() public view returns (uint256) {
        if (reserve1 == 0) { revert("empty"); }
        return reserve0 / reserve1;
    }

    function LatestAnswer() external view returns (int256);
}
"#;

    #[test]
    fn extracts_only_keyword_functions_in_order() {
        let code = extract_price_functions(&bundle(true, SAMPLE), PRICE_KEYWORDS).unwrap();
        assert!(code.contains("function getPrice()"));
        assert!(code.contains("function LatestAnswer()"));
        assert!(!code.contains("function transfer"));
        let gp = code.find("getPrice").unwrap();
        let la = code.find("LatestAnswer").unwrap();
        assert!(gp < la);
        // The nested revert-branch brace must not truncate the body.
        assert!(code.contains("return reserve0 / reserve1;"));
    }

    #[test]
    fn unverified_bundle_is_rejected() {
        match extract_price_functions(&bundle(false, SAMPLE), PRICE_KEYWORDS) {
            Err(InferError::NoSource(a)) => assert_eq!(a, addr(5)),
            other => panic!("expected NoSource, got {other:?}"),
        }
    }

    #[test]
    fn no_matches_yields_empty_string() {
        let code =
            extract_price_functions(&bundle(true, "function mint() public {}"), PRICE_KEYWORDS)
                .unwrap();
        assert_eq!(code, "");
    }

    #[test]
    fn braces_inside_comments_and_strings_are_ignored() {
        let src = r#"
function rateOf() public returns (uint256) {
    /* stray } in comment */
    string memory s = "also } here";
    return 1;
}
function helper() public {}
"#;
        let code = extract_price_functions(&bundle(true, src), PRICE_KEYWORDS).unwrap();
        assert!(code.contains("return 1;"));
        assert!(code.trim_end().ends_with('}'));
        assert!(!code.contains("helper"));
    }

    #[test]
    fn bundle_loading_reads_metadata_and_sources() {
        let dir = tempfile::tempdir().unwrap();
        let contract = addr(9);
        let bdir = dir.path().join(contract.to_string());
        std::fs::create_dir_all(&bdir).unwrap();
        std::fs::write(bdir.join("metadata.json"), r#"{"verified": true}"#).unwrap();
        std::fs::write(bdir.join("B.sol"), "function price() public {}").unwrap();
        std::fs::write(bdir.join("A.sol"), "function rate() public {}").unwrap();
        std::fs::write(bdir.join("notes.txt"), "ignored").unwrap();

        let b = load_source_bundle(dir.path(), contract).unwrap();
        assert!(b.verified);
        assert_eq!(b.files.len(), 2);
        assert_eq!(b.files[0].0, "A.sol");
        assert_eq!(b.files[1].0, "B.sol");

        match load_source_bundle(dir.path(), addr(8)) {
            Err(InferError::NoSource(a)) => assert_eq!(a, addr(8)),
            other => panic!("expected NoSource, got {other:?}"),
        }
    }
}
