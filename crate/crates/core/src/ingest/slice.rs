//! Splitting a trace into user invocations.
//!
//! An invocation opens at each outermost call whose caller is user-controlled
//! and whose callee is not; every transfer emitted beneath that call belongs
//! to it. Traces with no qualifying call (say, a plain send, or a call into a
//! contract that ended up user-controlled) form a single invocation spanning
//! the entry frame. Transfers emitted outside any invocation attach to the
//! most recently opened one — or to the first, when they precede them all.
//!
//! Transfers carry two positions: a per-invocation time index (their 1-based
//! position, the index the transfer graph uses) and a global emission index
//! that totally orders actions across the whole transaction.

use super::decode::walk_transfers;
use super::{CallFrame, TransactionTrace, TransferAction};
use crate::graph::UserControlledSet;

/// A transfer with its global emission index (1-based, transaction-wide).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequencedTransfer {
    pub global_index: u32,
    pub action: TransferAction,
}

/// One user invocation: a slice of the transaction's transfers. The local
/// time index of `transfers[i]` is `i + 1`.
#[derive(Debug, Clone)]
pub struct UserInvocation {
    pub index: usize,
    pub transfers: Vec<SequencedTransfer>,
}

impl UserInvocation {
    /// Global emission span covered by this invocation's transfers.
    pub fn global_span(&self) -> Option<(u32, u32)> {
        match (self.transfers.first(), self.transfers.last()) {
            (Some(a), Some(b)) => Some((a.global_index, b.global_index)),
            _ => None,
        }
    }
}

/// Walks the call tree assigning each frame the invocation in force when it
/// executes, then groups decoded transfers accordingly.
pub fn slice_user_invocations(
    trace: &TransactionTrace,
    uc: &UserControlledSet,
) -> Vec<UserInvocation> {
    // First pass, preorder: which invocation (if any) encloses each frame,
    // and how many invocations have opened by the time each frame runs.
    let mut frame_inv: Vec<Option<usize>> = Vec::new();
    let mut opened_by: Vec<usize> = Vec::new();
    let mut opened = 0usize;
    fn assign(
        frame: &CallFrame,
        inside: Option<usize>,
        uc: &UserControlledSet,
        frame_inv: &mut Vec<Option<usize>>,
        opened_by: &mut Vec<usize>,
        opened: &mut usize,
    ) {
        let here = match inside {
            Some(id) => Some(id),
            None if uc.contains(&frame.caller) && !uc.contains(&frame.callee) => {
                let id = *opened;
                *opened += 1;
                Some(id)
            }
            None => None,
        };
        frame_inv.push(here);
        opened_by.push(*opened);
        for child in &frame.children {
            assign(child, here, uc, frame_inv, opened_by, opened);
        }
    }
    assign(
        &trace.entry,
        None,
        uc,
        &mut frame_inv,
        &mut opened_by,
        &mut opened,
    );

    let (located, _warnings) = walk_transfers(&trace.entry);
    if opened == 0 {
        // No qualifying call: the whole entry frame is one invocation.
        let transfers = located
            .into_iter()
            .enumerate()
            .map(|(i, t)| SequencedTransfer {
                global_index: i as u32 + 1,
                action: t.action,
            })
            .collect();
        return vec![UserInvocation {
            index: 0,
            transfers,
        }];
    }

    let mut invocations: Vec<UserInvocation> = (0..opened)
        .map(|index| UserInvocation {
            index,
            transfers: Vec::new(),
        })
        .collect();
    // Orphan attachment: most recently opened invocation at emission time.
    let mut pending: Vec<SequencedTransfer> = Vec::new();
    for (i, t) in located.into_iter().enumerate() {
        let seq = SequencedTransfer {
            global_index: i as u32 + 1,
            action: t.action,
        };
        match frame_inv[t.frame] {
            Some(id) => invocations[id].transfers.push(seq),
            None if opened_by[t.frame] > 0 => {
                invocations[opened_by[t.frame] - 1].transfers.push(seq)
            }
            None => pending.push(seq),
        }
    }
    if !pending.is_empty() {
        // Transfers that preceded every invocation lead the first slice.
        let mut lead = pending;
        lead.append(&mut invocations[0].transfers);
        invocations[0].transfers = lead;
    }
    invocations
}
