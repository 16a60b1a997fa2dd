//! Transaction ingestion: fixture files, live RPC traces, ERC-20 transfer
//! decoding, invocation slicing and balance-delta extraction.

mod balance;
mod decode;
mod fixture;
mod rpc;
mod slice;

pub use balance::{compute_balance_deltas, BalanceDelta};
pub use decode::{
    decode_transfers, TransferAction, TransferKind, TRANSFER_TOPIC, WRAP_DEPOSIT_TOPIC,
    WRAP_WITHDRAWAL_TOPIC,
};
pub use fixture::{atomic_write, load_trace, save_trace, ScanInput};
pub use rpc::{fetch_trace, RpcConfig};
pub use slice::{slice_user_invocations, SequencedTransfer, UserInvocation};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::primitives::{Address, Selector, Word};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("unsupported fixture version {0} (this build reads version 1)")]
    Version(u64),
    #[error("fixture schema violation: {0}")]
    Parse(String),
    #[error("balance delta left the signed 257-bit accumulator range")]
    Overflow,
    #[error("transaction {0} not found at the endpoint")]
    TxNotFound(Word),
    #[error("endpoint lacks call-tracer debug tracing: {0}")]
    TracerUnsupported(String),
    #[error("rpc transport failure: {0}")]
    Network(String),
}

/// One emitted event, exactly as it appears in a trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawLog {
    pub address: Address,
    #[serde(default)]
    pub topics: Vec<Word>,
    #[serde(default, with = "hex_data")]
    pub data: Vec<u8>,
}

/// What a call frame did: a plain message call or a contract creation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CallOp {
    #[default]
    Call,
    Create,
}

/// One frame of the call tree. `children` preserves execution order; a
/// frame's own logs are treated as emitted before its children's.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CallFrame {
    pub caller: Address,
    pub callee: Address,
    #[serde(default)]
    pub selector: Selector,
    pub depth: u32,
    #[serde(default, skip_serializing_if = "is_default_op")]
    pub op: CallOp,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub logs: Vec<RawLog>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<CallFrame>,
}

fn is_default_op(op: &CallOp) -> bool {
    *op == CallOp::Call
}

impl CallFrame {
    /// Depth-first preorder walk over the tree.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a CallFrame)) {
        visit(self);
        for child in &self.children {
            child.walk(visit);
        }
    }
}

/// A decoded external transaction: metadata plus the entry call frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransactionTrace {
    pub tx_hash: Word,
    pub chain_id: u64,
    pub block_number: u64,
    pub initiator: Address,
    pub entry: CallFrame,
}

mod hex_data {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&format!("0x{}", hex::encode(bytes)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(de)?;
        let body = s
            .strip_prefix("0x")
            .ok_or_else(|| de::Error::custom("data must be 0x-prefixed hex"))?;
        hex::decode(body).map_err(de::Error::custom)
    }
}
