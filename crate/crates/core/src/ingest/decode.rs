//! ERC-20 transfer extraction from raw logs.
//!
//! Three event shapes become token movements:
//!
//! * `Transfer(address,address,uint256)` — classified as transferring,
//!   minting (sender is a null sink) or burning (receiver is a null sink);
//! * `Deposit(address,uint256)` / `Withdrawal(address,uint256)` — the
//!   wrapped-native-token pattern, normalized to a mint/burn of the emitting
//!   contract's token so wrap and unwrap steps participate in recovery.
//!
//! Logs that carry a known topic but the wrong shape are skipped with a
//! warning instead of failing the scan; unrelated events are ignored.

use crate::primitives::{Address, TokenAmount, Word};

use super::{CallFrame, RawLog, TransactionTrace};

/// keccak256("Transfer(address,address,uint256)")
pub const TRANSFER_TOPIC: Word = Word([
    0xdd, 0xf2, 0x52, 0xad, 0x1b, 0xe2, 0xc8, 0x9b, 0x69, 0xc2, 0xb0, 0x68, 0xfc, 0x37, 0x8d,
    0xaa, 0x95, 0x2b, 0xa7, 0xf1, 0x63, 0xc4, 0xa1, 0x16, 0x28, 0xf5, 0x5a, 0x4d, 0xf5, 0x23,
    0xb3, 0xef,
]);

/// keccak256("Deposit(address,uint256)") — wrapped native token mint.
pub const WRAP_DEPOSIT_TOPIC: Word = Word([
    0xe1, 0xff, 0xfc, 0xc4, 0x92, 0x3d, 0x04, 0xb5, 0x59, 0xf4, 0xd2, 0x9a, 0x8b, 0xfc, 0x6c,
    0xda, 0x04, 0xeb, 0x5b, 0x0d, 0x3c, 0x46, 0x07, 0x51, 0xc2, 0x40, 0x2c, 0x5c, 0x5c, 0xc9,
    0x10, 0x9c,
]);

/// keccak256("Withdrawal(address,uint256)") — wrapped native token burn.
pub const WRAP_WITHDRAWAL_TOPIC: Word = Word([
    0x7f, 0xcf, 0x53, 0x2c, 0x15, 0xf0, 0xa6, 0xdb, 0x0b, 0xd6, 0xd0, 0xe0, 0x38, 0xbe, 0xa7,
    0x1d, 0x30, 0xd8, 0x08, 0xc7, 0xd9, 0x8c, 0xb3, 0xbf, 0x72, 0x68, 0xa9, 0x5b, 0xf5, 0x08,
    0x1b, 0x65,
]);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TransferKind {
    Transferring,
    Minting,
    Burning,
}

/// One token movement. Invariants: `kind` is `Minting` iff `sender` is a
/// null sink and `Burning` iff `receiver` is one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferAction {
    pub token: Address,
    pub sender: Address,
    pub receiver: Address,
    pub amount: TokenAmount,
    pub kind: TransferKind,
}

pub(super) enum LogOutcome {
    Transfer(TransferAction),
    Skipped(String),
    Irrelevant,
}

fn word_at(data: &[u8]) -> Option<Word> {
    if data.len() != 32 {
        return None;
    }
    let mut out = [0u8; 32];
    out.copy_from_slice(data);
    Some(Word(out))
}

pub(super) fn decode_log(log: &RawLog) -> LogOutcome {
    let Some(topic0) = log.topics.first() else {
        return LogOutcome::Irrelevant;
    };
    match *topic0 {
        TRANSFER_TOPIC => {
            if log.topics.len() != 3 {
                return LogOutcome::Skipped(format!(
                    "malformed Transfer log from {}: {} topics (expected 3, from/to indexed)",
                    log.address,
                    log.topics.len()
                ));
            }
            let Some(value) = word_at(&log.data) else {
                return LogOutcome::Skipped(format!(
                    "malformed Transfer log from {}: {}-byte data (expected 32)",
                    log.address,
                    log.data.len()
                ));
            };
            let sender = Address::from_topic(&log.topics[1]);
            let receiver = Address::from_topic(&log.topics[2]);
            let kind = match (sender.is_null(), receiver.is_null()) {
                (true, true) => {
                    return LogOutcome::Skipped(format!(
                        "null-to-null Transfer of token {} carries no balance movement",
                        log.address
                    ));
                }
                (true, false) => TransferKind::Minting,
                (false, true) => TransferKind::Burning,
                (false, false) => TransferKind::Transferring,
            };
            LogOutcome::Transfer(TransferAction {
                token: log.address,
                sender,
                receiver,
                amount: TokenAmount::from_word(&value),
                kind,
            })
        }
        WRAP_DEPOSIT_TOPIC | WRAP_WITHDRAWAL_TOPIC => {
            let is_deposit = *topic0 == WRAP_DEPOSIT_TOPIC;
            let label = if is_deposit { "Deposit" } else { "Withdrawal" };
            if log.topics.len() != 2 {
                return LogOutcome::Skipped(format!(
                    "malformed {label} log from {}: {} topics (expected 2)",
                    log.address,
                    log.topics.len()
                ));
            }
            let Some(value) = word_at(&log.data) else {
                return LogOutcome::Skipped(format!(
                    "malformed {label} log from {}: {}-byte data (expected 32)",
                    log.address,
                    log.data.len()
                ));
            };
            let account = Address::from_topic(&log.topics[1]);
            let action = if is_deposit {
                TransferAction {
                    token: log.address,
                    sender: Address::ZERO,
                    receiver: account,
                    amount: TokenAmount::from_word(&value),
                    kind: TransferKind::Minting,
                }
            } else {
                TransferAction {
                    token: log.address,
                    sender: account,
                    receiver: Address::ZERO,
                    amount: TokenAmount::from_word(&value),
                    kind: TransferKind::Burning,
                }
            };
            LogOutcome::Transfer(action)
        }
        _ => LogOutcome::Irrelevant,
    }
}

/// A transfer plus the preorder index of the call frame that emitted it,
/// used by invocation slicing.
pub(super) struct LocatedTransfer {
    pub frame: usize,
    pub action: TransferAction,
}

pub(super) fn walk_transfers(entry: &CallFrame) -> (Vec<LocatedTransfer>, Vec<String>) {
    let mut transfers = Vec::new();
    let mut warnings = Vec::new();
    let mut frame_idx = 0usize;
    fn go(
        frame: &CallFrame,
        frame_idx: &mut usize,
        transfers: &mut Vec<LocatedTransfer>,
        warnings: &mut Vec<String>,
    ) {
        let here = *frame_idx;
        *frame_idx += 1;
        for log in &frame.logs {
            match decode_log(log) {
                LogOutcome::Transfer(action) => transfers.push(LocatedTransfer {
                    frame: here,
                    action,
                }),
                LogOutcome::Skipped(w) => warnings.push(w),
                LogOutcome::Irrelevant => {}
            }
        }
        for child in &frame.children {
            go(child, frame_idx, transfers, warnings);
        }
    }
    go(entry, &mut frame_idx, &mut transfers, &mut warnings);
    (transfers, warnings)
}

/// Decodes every token movement in the trace, in emission order (a frame's
/// own logs, then its children in call order). Returns the movements plus
/// warnings for recognizably malformed logs.
pub fn decode_transfers(trace: &TransactionTrace) -> (Vec<TransferAction>, Vec<String>) {
    let (located, warnings) = walk_transfers(&trace.entry);
    (located.into_iter().map(|t| t.action).collect(), warnings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::Selector;

    fn addr(n: u8) -> Address {
        Address([n; 20])
    }

    fn topic_of(a: Address) -> Word {
        let mut w = [0u8; 32];
        w[12..].copy_from_slice(&a.0);
        Word(w)
    }

    fn amount_word(v: u128) -> Vec<u8> {
        let mut w = [0u8; 32];
        w[16..].copy_from_slice(&v.to_be_bytes());
        w.to_vec()
    }

    pub(crate) fn transfer_log(token: Address, from: Address, to: Address, v: u128) -> RawLog {
        RawLog {
            address: token,
            topics: vec![TRANSFER_TOPIC, topic_of(from), topic_of(to)],
            data: amount_word(v),
        }
    }

    fn frame_with_logs(logs: Vec<RawLog>) -> TransactionTrace {
        TransactionTrace {
            tx_hash: Word([0xab; 32]),
            chain_id: 1,
            block_number: 1,
            initiator: addr(0x11),
            entry: CallFrame {
                caller: addr(0x11),
                callee: addr(0x22),
                selector: Selector::default(),
                depth: 0,
                op: super::super::CallOp::Call,
                logs,
                children: vec![],
            },
        }
    }

    #[test]
    fn topic_constants_match_their_signatures() {
        use sha3::{Digest, Keccak256};
        let h = |sig: &str| Word(Keccak256::digest(sig.as_bytes()).into());
        assert_eq!(h("Transfer(address,address,uint256)"), TRANSFER_TOPIC);
        assert_eq!(h("Deposit(address,uint256)"), WRAP_DEPOSIT_TOPIC);
        assert_eq!(h("Withdrawal(address,uint256)"), WRAP_WITHDRAWAL_TOPIC);
    }

    #[test]
    fn classifies_transfer_mint_and_burn() {
        let token = addr(0xaa);
        let user = addr(0x11);
        let pool = addr(0x33);
        let trace = frame_with_logs(vec![
            transfer_log(token, user, pool, 5),
            transfer_log(token, Address::ZERO, user, 7),
            transfer_log(token, user, Address::ZERO, 2),
        ]);
        let (actions, warnings) = decode_transfers(&trace);
        assert!(warnings.is_empty());
        let kinds: Vec<_> = actions.iter().map(|a| a.kind).collect();
        assert_eq!(
            kinds,
            vec![
                TransferKind::Transferring,
                TransferKind::Minting,
                TransferKind::Burning
            ]
        );
        assert_eq!(actions[0].amount, TokenAmount::from_u128(5));
    }

    #[test]
    fn dead_sink_counts_as_burn() {
        let dead: Address = "0x000000000000000000000000000000000000dead".parse().unwrap();
        let trace = frame_with_logs(vec![transfer_log(addr(0xaa), addr(0x11), dead, 9)]);
        let (actions, _) = decode_transfers(&trace);
        assert_eq!(actions[0].kind, TransferKind::Burning);
    }

    #[test]
    fn short_topics_warn_and_skip() {
        let mut bad = transfer_log(addr(0xaa), addr(0x11), addr(0x33), 5);
        bad.topics.pop();
        let trace = frame_with_logs(vec![bad]);
        let (actions, warnings) = decode_transfers(&trace);
        assert!(actions.is_empty());
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("malformed Transfer"));
    }

    #[test]
    fn null_to_null_warns_and_skips() {
        let trace = frame_with_logs(vec![transfer_log(
            addr(0xaa),
            Address::ZERO,
            "0x000000000000000000000000000000000000dead".parse().unwrap(),
            1,
        )]);
        let (actions, warnings) = decode_transfers(&trace);
        assert!(actions.is_empty());
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn wrap_deposit_becomes_mint_of_emitter() {
        let weth = addr(0xee);
        let user = addr(0x11);
        let log = RawLog {
            address: weth,
            topics: vec![WRAP_DEPOSIT_TOPIC, topic_of(user)],
            data: amount_word(1_000),
        };
        let trace = frame_with_logs(vec![log]);
        let (actions, warnings) = decode_transfers(&trace);
        assert!(warnings.is_empty());
        assert_eq!(
            actions[0],
            TransferAction {
                token: weth,
                sender: Address::ZERO,
                receiver: user,
                amount: TokenAmount::from_u128(1_000),
                kind: TransferKind::Minting,
            }
        );
    }

    #[test]
    fn wrap_withdrawal_becomes_burn_of_emitter() {
        let weth = addr(0xee);
        let user = addr(0x11);
        let log = RawLog {
            address: weth,
            topics: vec![WRAP_WITHDRAWAL_TOPIC, topic_of(user)],
            data: amount_word(400),
        };
        let trace = frame_with_logs(vec![log]);
        let (actions, _) = decode_transfers(&trace);
        assert_eq!(actions[0].kind, TransferKind::Burning);
        assert_eq!(actions[0].sender, user);
        assert_eq!(actions[0].receiver, Address::ZERO);
    }

    #[test]
    fn unrelated_events_are_ignored_silently() {
        let log = RawLog {
            address: addr(0xaa),
            topics: vec![Word([0x01; 32])],
            data: vec![],
        };
        let trace = frame_with_logs(vec![log]);
        let (actions, warnings) = decode_transfers(&trace);
        assert!(actions.is_empty());
        assert!(warnings.is_empty());
    }

    #[test]
    fn emission_order_is_frame_logs_then_children() {
        let token = addr(0xaa);
        let child = CallFrame {
            caller: addr(0x22),
            callee: addr(0x33),
            selector: Selector::default(),
            depth: 1,
            op: super::super::CallOp::Call,
            logs: vec![transfer_log(token, addr(0x33), addr(0x11), 2)],
            children: vec![],
        };
        let mut trace = frame_with_logs(vec![transfer_log(token, addr(0x11), addr(0x33), 1)]);
        trace.entry.children.push(child);
        let (actions, _) = decode_transfers(&trace);
        let amounts: Vec<_> = actions.iter().map(|a| a.amount.clone()).collect();
        assert_eq!(
            amounts,
            vec![TokenAmount::from_u128(1), TokenAmount::from_u128(2)]
        );
    }
}
