//! Reading and writing trace fixtures.
//!
//! The on-disk format is JSON, version 1:
//!
//! ```json
//! {
//!   "version": 1,
//!   "txHash": "0x…", "chainId": 1, "blockNumber": 17949214,
//!   "initiator": "0x…",
//!   "calls": [ { "caller": "0x…", "callee": "0x…", "selector": "0x022c0d9f",
//!                "depth": 0, "logs": [...], "children": [...] } ]
//! }
//! ```
//!
//! All hex is lowercase and 0x-prefixed. `calls` holds exactly the entry
//! frame. Three optional sections extend the core schema: per-frame
//! `"op": "create"` marks contract creations, and top-level `"tokens"` /
//! `"pools"` carry token metadata and AMM starting states for offline
//! analysis. Files without them parse fine.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CallFrame, IngestError, TransactionTrace};
use crate::amm::PoolConfig;
use crate::primitives::{Address, Token, TokenRegistry, Word};

const FIXTURE_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct FixtureFile {
    version: u64,
    tx_hash: Word,
    chain_id: u64,
    block_number: u64,
    initiator: Address,
    calls: Vec<CallFrame>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    tokens: Vec<Token>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pools: Vec<PoolConfig>,
}

/// Everything a scan needs for one transaction: the trace itself plus the
/// fixture's optional token metadata and AMM starting states.
#[derive(Debug, Clone)]
pub struct ScanInput {
    pub trace: TransactionTrace,
    pub tokens: TokenRegistry,
    pub token_list: Vec<Token>,
    pub pools: Vec<PoolConfig>,
}

impl ScanInput {
    pub fn bare(trace: TransactionTrace) -> ScanInput {
        ScanInput {
            trace,
            tokens: TokenRegistry::default(),
            token_list: Vec::new(),
            pools: Vec::new(),
        }
    }
}

/// Loads and validates one fixture file.
pub fn load_trace(path: &Path) -> Result<ScanInput, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_fixture(&text)
}

/// Parses fixture JSON from memory; see [`load_trace`].
pub fn parse_fixture(text: &str) -> Result<ScanInput, IngestError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| IngestError::Parse(e.to_string()))?;
    match value.get("version").and_then(|v| v.as_u64()) {
        Some(FIXTURE_VERSION) => {}
        Some(other) => return Err(IngestError::Version(other)),
        None => return Err(IngestError::Parse("missing integer `version`".into())),
    }
    let file: FixtureFile =
        serde_json::from_value(value).map_err(|e| IngestError::Parse(e.to_string()))?;
    build_input(file)
}

fn build_input(file: FixtureFile) -> Result<ScanInput, IngestError> {
    if file.calls.len() != 1 {
        return Err(IngestError::Parse(format!(
            "`calls` must hold exactly the entry frame, found {}",
            file.calls.len()
        )));
    }
    let entry = file.calls.into_iter().next().expect("length checked");
    if entry.depth != 0 {
        return Err(IngestError::Parse(format!(
            "entry frame depth must be 0, found {}",
            entry.depth
        )));
    }
    validate_depths(&entry)?;
    for pool in &file.pools {
        pool.validate().map_err(IngestError::Parse)?;
    }
    let trace = TransactionTrace {
        tx_hash: file.tx_hash,
        chain_id: file.chain_id,
        block_number: file.block_number,
        initiator: file.initiator,
        entry,
    };
    Ok(ScanInput {
        trace,
        tokens: TokenRegistry::new(file.tokens.iter().cloned()),
        token_list: file.tokens,
        pools: file.pools,
    })
}

fn validate_depths(frame: &CallFrame) -> Result<(), IngestError> {
    for child in &frame.children {
        if child.depth != frame.depth + 1 {
            return Err(IngestError::Parse(format!(
                "child of depth-{} frame has depth {}, expected {}",
                frame.depth,
                child.depth,
                frame.depth + 1
            )));
        }
        validate_depths(child)?;
    }
    Ok(())
}

/// Serializes a scan input back to fixture JSON (round-trip stable) and
/// writes it atomically.
pub fn save_trace(path: &Path, input: &ScanInput) -> Result<(), IngestError> {
    let text = render_fixture(input);
    atomic_write(path, text.as_bytes()).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Fixture JSON text for a scan input.
pub fn render_fixture(input: &ScanInput) -> String {
    let file = FixtureFile {
        version: FIXTURE_VERSION,
        tx_hash: input.trace.tx_hash,
        chain_id: input.trace.chain_id,
        block_number: input.trace.block_number,
        initiator: input.trace.initiator,
        calls: vec![input.trace.entry.clone()],
        tokens: input.token_list.clone(),
        pools: input.pools.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("fixture serialization");
    text.push('\n');
    text
}

/// Writes via a sibling temp file and rename so readers never observe a
/// partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = path.with_extension("tmp~");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    match fs::rename(&tmp, path) {
        Ok(()) => {
            if let Some(dir) = dir {
                // Best effort: persist the rename itself.
                let _ = fs::File::open(dir).and_then(|d| d.sync_all());
            }
            Ok(())
        }
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(version: u64) -> String {
        format!(
            r#"{{
  "version": {version},
  "txHash": "0x{}",
  "chainId": 1,
  "blockNumber": 1000,
  "initiator": "0x1111111111111111111111111111111111111111",
  "calls": [
    {{ "caller": "0x1111111111111111111111111111111111111111",
       "callee": "0x2222222222222222222222222222222222222222",
       "selector": "0x00000000", "depth": 0 }}
  ]
}}"#,
            "ab".repeat(32)
        )
    }

    #[test]
    fn minimal_fixture_parses_to_empty_entry_frame() {
        let input = parse_fixture(&minimal(1)).unwrap();
        assert_eq!(input.trace.chain_id, 1);
        assert!(input.trace.entry.logs.is_empty());
        assert!(input.trace.entry.children.is_empty());
        assert_eq!(input.trace.entry.op, crate::ingest::CallOp::Call);
        assert!(input.pools.is_empty());
    }

    #[test]
    fn wrong_version_is_a_version_error() {
        match parse_fixture(&minimal(2)) {
            Err(IngestError::Version(2)) => {}
            other => panic!("expected Version(2), got {other:?}"),
        }
    }

    #[test]
    fn truncated_json_is_a_parse_error() {
        let text = minimal(1);
        let cut = &text[..text.len() / 2];
        assert!(matches!(parse_fixture(cut), Err(IngestError::Parse(_))));
    }

    #[test]
    fn depth_mismatch_is_rejected() {
        let text = minimal(1).replace(
            r#""selector": "0x00000000", "depth": 0 }"#,
            r#""selector": "0x00000000", "depth": 0,
               "children": [ {"caller": "0x2222222222222222222222222222222222222222",
                              "callee": "0x3333333333333333333333333333333333333333",
                              "selector": "0x00000000", "depth": 5} ] }"#,
        );
        match parse_fixture(&text) {
            Err(IngestError::Parse(msg)) => assert!(msg.contains("depth"), "{msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn round_trip_is_byte_stable() {
        let input = parse_fixture(&minimal(1)).unwrap();
        let once = render_fixture(&input);
        let twice = render_fixture(&parse_fixture(&once).unwrap());
        assert_eq!(once, twice);
    }
}
