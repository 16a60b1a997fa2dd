//! Fetching traces from a JSON-RPC endpoint.
//!
//! Three calls reconstruct the fixture shape for a transaction: the
//! transaction record (initiator, block), the chain id, and a call-tracer
//! debug trace with logs attached to frames. The resulting [`ScanInput`] is
//! exactly what [`super::load_trace`] would produce, so a fetched trace can
//! be frozen to disk and re-scanned byte-for-byte.

use serde::Deserialize;
use serde_json::{json, Value};

use super::{CallFrame, CallOp, IngestError, RawLog, ScanInput, TransactionTrace};
use crate::primitives::{Address, Selector, Word};

#[derive(Debug, Clone)]
pub struct RpcConfig {
    pub url: String,
    pub timeout_secs: u64,
}

impl RpcConfig {
    pub fn new(url: impl Into<String>) -> RpcConfig {
        RpcConfig {
            url: url.into(),
            timeout_secs: 60,
        }
    }
}

fn rpc_call(cfg: &RpcConfig, method: &str, params: Value) -> Result<Value, IngestError> {
    let agent = ureq::AgentBuilder::new()
        .timeout(std::time::Duration::from_secs(cfg.timeout_secs))
        .build();
    let body = json!({ "jsonrpc": "2.0", "id": 1, "method": method, "params": params });
    let resp = agent
        .post(&cfg.url)
        .send_json(body)
        .map_err(|e| IngestError::Network(e.to_string()))?;
    let reply: Value = resp
        .into_json()
        .map_err(|e| IngestError::Network(format!("bad json-rpc reply: {e}")))?;
    if let Some(err) = reply.get("error").filter(|e| !e.is_null()) {
        let code = err.get("code").and_then(Value::as_i64).unwrap_or(0);
        let msg = err
            .get("message")
            .and_then(Value::as_str)
            .unwrap_or("unknown error")
            .to_string();
        // -32601: method not found — the node has no debug namespace.
        if code == -32601 || msg.to_ascii_lowercase().contains("not supported") {
            return Err(IngestError::TracerUnsupported(msg));
        }
        return Err(IngestError::Network(format!("rpc error {code}: {msg}")));
    }
    Ok(reply.get("result").cloned().unwrap_or(Value::Null))
}

fn parse_quantity(v: &Value, what: &str) -> Result<u64, IngestError> {
    let s = v
        .as_str()
        .ok_or_else(|| IngestError::Network(format!("{what}: expected hex quantity")))?;
    let body = s.strip_prefix("0x").unwrap_or(s);
    u64::from_str_radix(body, 16)
        .map_err(|_| IngestError::Network(format!("{what}: bad hex quantity `{s}`")))
}

/// One frame of geth-style call-tracer output (`withLog` variant).
#[derive(Debug, Deserialize)]
struct TracerFrame {
    #[serde(rename = "type", default)]
    frame_type: String,
    from: Address,
    #[serde(default)]
    to: Option<Address>,
    #[serde(default)]
    input: Option<String>,
    #[serde(default)]
    logs: Vec<TracerLog>,
    #[serde(default)]
    calls: Vec<TracerFrame>,
}

#[derive(Debug, Deserialize)]
struct TracerLog {
    address: Address,
    #[serde(default)]
    topics: Vec<Word>,
    #[serde(default)]
    data: Option<String>,
}

fn selector_of(input: Option<&str>) -> Selector {
    let Some(body) = input.and_then(|s| s.strip_prefix("0x")) else {
        return Selector::default();
    };
    if body.len() < 8 {
        return Selector::default();
    }
    let mut out = [0u8; 4];
    if hex::decode_to_slice(&body[..8], &mut out).is_err() {
        return Selector::default();
    }
    Selector(out)
}

fn convert_frame(frame: TracerFrame, depth: u32) -> Result<CallFrame, IngestError> {
    let op = if frame.frame_type.to_ascii_uppercase().starts_with("CREATE") {
        CallOp::Create
    } else {
        CallOp::Call
    };
    let callee = frame.to.unwrap_or(Address::ZERO);
    let logs = frame
        .logs
        .into_iter()
        .map(|l| {
            let data = match l.data.as_deref().and_then(|d| d.strip_prefix("0x")) {
                Some(body) => hex::decode(body)
                    .map_err(|e| IngestError::Network(format!("bad log data hex: {e}")))?,
                None => Vec::new(),
            };
            Ok(RawLog {
                address: l.address,
                topics: l.topics,
                data,
            })
        })
        .collect::<Result<Vec<_>, IngestError>>()?;
    let children = frame
        .calls
        .into_iter()
        .map(|c| convert_frame(c, depth + 1))
        .collect::<Result<Vec<_>, IngestError>>()?;
    Ok(CallFrame {
        caller: frame.from,
        callee,
        selector: selector_of(frame.input.as_deref()),
        depth,
        op,
        logs,
        children,
    })
}

/// Fetches and normalizes one transaction's trace.
pub fn fetch_trace(cfg: &RpcConfig, tx_hash: Word) -> Result<ScanInput, IngestError> {
    let tx = rpc_call(cfg, "eth_getTransactionByHash", json!([tx_hash.to_string()]))?;
    if tx.is_null() {
        return Err(IngestError::TxNotFound(tx_hash));
    }
    let initiator: Address = tx
        .get("from")
        .and_then(Value::as_str)
        .ok_or_else(|| IngestError::Network("transaction record lacks `from`".into()))?
        .parse()
        .map_err(|e| IngestError::Network(format!("bad `from` address: {e}")))?;
    let block_number = match tx.get("blockNumber") {
        Some(v) if !v.is_null() => parse_quantity(v, "blockNumber")?,
        _ => 0, // pending transaction
    };

    let chain_id = parse_quantity(&rpc_call(cfg, "eth_chainId", json!([]))?, "eth_chainId")?;

    let trace = rpc_call(
        cfg,
        "debug_traceTransaction",
        json!([
            tx_hash.to_string(),
            { "tracer": "callTracer", "tracerConfig": { "withLog": true } }
        ]),
    )?;
    if trace.is_null() {
        return Err(IngestError::TracerUnsupported(
            "tracer returned null".into(),
        ));
    }
    let root: TracerFrame = serde_json::from_value(trace)
        .map_err(|e| IngestError::Network(format!("unexpected tracer output: {e}")))?;
    let entry = convert_frame(root, 0)?;

    Ok(ScanInput::bare(TransactionTrace {
        tx_hash,
        chain_id,
        block_number,
        initiator,
        entry,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selector_extraction_tolerates_short_input() {
        assert_eq!(selector_of(None), Selector::default());
        assert_eq!(selector_of(Some("0x")), Selector::default());
        assert_eq!(selector_of(Some("0x1234")), Selector::default());
        assert_eq!(
            selector_of(Some("0x022c0d9f00aa")),
            Selector([0x02, 0x2c, 0x0d, 0x9f])
        );
    }

    #[test]
    fn create_frames_are_marked() {
        let frame = TracerFrame {
            frame_type: "CREATE2".into(),
            from: Address([1; 20]),
            to: Some(Address([2; 20])),
            input: None,
            logs: vec![],
            calls: vec![],
        };
        let converted = convert_frame(frame, 0).unwrap();
        assert_eq!(converted.op, CallOp::Create);
        assert_eq!(converted.depth, 0);
    }
}
