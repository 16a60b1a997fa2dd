//! The transfer graph: token movements of one invocation as a directed
//! multigraph whose edges carry time indices, with every user-controlled
//! account collapsed into a single supernode and the null sinks into another.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::ingest::{CallFrame, CallOp, TransactionTrace, TransferAction, UserInvocation};
use crate::primitives::{Address, TokenRegistry};

/// The set of accounts the transaction sender controls: the initiator, every
/// contract created (transitively) by a member during the transaction, and —
/// heuristically — an entry contract that only the initiator ever calls.
#[derive(Debug, Clone, Default)]
pub struct UserControlledSet {
    accounts: BTreeSet<Address>,
    /// True when the entry-callee heuristic added a member; reports surface
    /// this since the heuristic can absorb single-caller public contracts.
    pub entry_heuristic_fired: bool,
}

impl UserControlledSet {
    pub fn from_accounts(accounts: impl IntoIterator<Item = Address>) -> UserControlledSet {
        UserControlledSet {
            accounts: accounts.into_iter().collect(),
            entry_heuristic_fired: false,
        }
    }

    pub fn contains(&self, addr: &Address) -> bool {
        self.accounts.contains(addr)
    }

    pub fn accounts(&self) -> impl Iterator<Item = &Address> {
        self.accounts.iter()
    }

    pub fn len(&self) -> usize {
        self.accounts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accounts.is_empty()
    }
}

/// Determines the user-controlled set for a trace.
///
/// Membership starts at the initiator; the entry contract joins when nothing
/// else in the trace calls it and it is not a known public router;
/// contract-creation closure then runs to a fixpoint so factory chains
/// (attack contract deploys a worker which deploys another) stay inside.
pub fn identify_user_controlled(
    trace: &TransactionTrace,
    known_routers: &BTreeSet<Address>,
) -> UserControlledSet {
    let mut accounts = BTreeSet::new();
    accounts.insert(trace.initiator);
    let mut entry_heuristic_fired = false;

    let entry_callee = trace.entry.callee;
    if entry_callee != trace.initiator
        && !entry_callee.is_null()
        && !known_routers.contains(&entry_callee)
    {
        let mut callers = BTreeSet::new();
        trace.entry.walk(&mut |frame: &CallFrame| {
            if frame.callee == entry_callee {
                callers.insert(frame.caller);
            }
        });
        if callers.iter().all(|c| *c == trace.initiator) {
            accounts.insert(entry_callee);
            entry_heuristic_fired = true;
        }
    }

    // Creation closure: a frame `op: create` hands `callee` to whoever
    // `caller` is; iterate until stable since creators may themselves be
    // freshly created.
    loop {
        let mut grew = false;
        trace.entry.walk(&mut |frame: &CallFrame| {
            if frame.op == CallOp::Create
                && accounts.contains(&frame.caller)
                && !frame.callee.is_null()
                && accounts.insert(frame.callee)
            {
                grew = true;
            }
        });
        if !grew {
            break;
        }
    }

    UserControlledSet {
        accounts,
        entry_heuristic_fired,
    }
}

/// A node of the transfer graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TgNode {
    /// All user-controlled accounts, collapsed.
    Uc,
    /// The zero/dead sinks: mint sources and burn destinations.
    Null,
    Account(Address),
}

impl TgNode {
    fn of(addr: &Address, uc: &UserControlledSet) -> TgNode {
        if addr.is_null() {
            TgNode::Null
        } else if uc.contains(addr) {
            TgNode::Uc
        } else {
            TgNode::Account(*addr)
        }
    }

    pub fn label(&self) -> String {
        match self {
            TgNode::Uc => "UC".into(),
            TgNode::Null => "NULL".into(),
            TgNode::Account(a) => a.short(),
        }
    }
}

/// One time-indexed edge: the i-th token action of the invocation.
#[derive(Debug, Clone)]
pub struct TgEdge {
    /// 1-based position within this invocation — the graph's clock.
    pub time_index: u32,
    /// 1-based position within the whole transaction.
    pub global_index: u32,
    pub source: TgNode,
    pub target: TgNode,
    pub action: TransferAction,
}

/// Transfer graph of one user invocation. Edges are sorted by `time_index`,
/// which runs 1..=n without gaps.
#[derive(Debug, Clone)]
pub struct TransferGraph {
    pub invocation: usize,
    pub nodes: BTreeSet<TgNode>,
    pub edges: Vec<TgEdge>,
}

impl TransferGraph {
    pub fn edge(&self, time_index: u32) -> &TgEdge {
        &self.edges[time_index as usize - 1]
    }
}

/// Builds the transfer graph for one invocation under a fixed UC set.
pub fn build_graph(inv: &UserInvocation, uc: &UserControlledSet) -> TransferGraph {
    let mut nodes = BTreeSet::new();
    let mut edges = Vec::with_capacity(inv.transfers.len());
    for (i, t) in inv.transfers.iter().enumerate() {
        let source = TgNode::of(&t.action.sender, uc);
        let target = TgNode::of(&t.action.receiver, uc);
        nodes.insert(source);
        nodes.insert(target);
        edges.push(TgEdge {
            time_index: i as u32 + 1,
            global_index: t.global_index,
            source,
            target,
            action: t.action.clone(),
        });
    }
    TransferGraph {
        invocation: inv.index,
        nodes,
        edges,
    }
}

/// DOT rendering for debugging: abbreviated node names, edges labeled
/// `T{index}:{symbol}:{amount}`.
pub fn to_dot(graph: &TransferGraph, tokens: &TokenRegistry) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph invocation_{} {{", graph.invocation);
    let _ = writeln!(out, "  rankdir=LR;");
    for node in &graph.nodes {
        let shape = match node {
            TgNode::Uc => " [shape=box]",
            TgNode::Null => " [shape=diamond]",
            TgNode::Account(_) => "",
        };
        let _ = writeln!(out, "  \"{}\"{};", node.label(), shape);
    }
    for edge in &graph.edges {
        let _ = writeln!(
            out,
            "  \"{}\" -> \"{}\" [label=\"T{}:{}:{}\"];",
            edge.source.label(),
            edge.target.label(),
            edge.time_index,
            tokens.name(&edge.action.token),
            edge.action.amount,
        );
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{SequencedTransfer, TransferKind};
    use crate::primitives::{Selector, Token, TokenAmount, Word};

    fn addr(n: u8) -> Address {
        Address([n; 20])
    }

    fn frame(caller: Address, callee: Address, depth: u32, op: CallOp) -> CallFrame {
        CallFrame {
            caller,
            callee,
            selector: Selector::default(),
            depth,
            op,
            logs: vec![],
            children: vec![],
        }
    }

    fn trace_with(entry: CallFrame, initiator: Address) -> TransactionTrace {
        TransactionTrace {
            tx_hash: Word([9; 32]),
            chain_id: 1,
            block_number: 1,
            initiator,
            entry,
        }
    }

    #[test]
    fn initiator_alone_when_entry_is_a_known_router() {
        let eoa = addr(0x11);
        let router = addr(0x22);
        let entry = frame(eoa, router, 0, CallOp::Call);
        let routers = BTreeSet::from([router]);
        let uc = identify_user_controlled(&trace_with(entry, eoa), &routers);
        assert_eq!(uc.len(), 1);
        assert!(uc.contains(&eoa));
        assert!(!uc.entry_heuristic_fired);
    }

    #[test]
    fn lone_caller_entry_contract_is_absorbed_and_flagged() {
        let eoa = addr(0x11);
        let attack = addr(0x22);
        let entry = frame(eoa, attack, 0, CallOp::Call);
        let uc = identify_user_controlled(&trace_with(entry, eoa), &BTreeSet::new());
        assert!(uc.contains(&attack));
        assert!(uc.entry_heuristic_fired);
    }

    #[test]
    fn entry_contract_with_other_callers_stays_outside() {
        let eoa = addr(0x11);
        let shared = addr(0x22);
        let third = addr(0x33);
        let mut entry = frame(eoa, shared, 0, CallOp::Call);
        let mut mid = frame(shared, third, 1, CallOp::Call);
        // Re-entrant call back into the entry contract from a third party.
        mid.children = vec![frame(third, shared, 2, CallOp::Call)];
        entry.children = vec![mid];
        let uc = identify_user_controlled(&trace_with(entry, eoa), &BTreeSet::new());
        assert!(!uc.contains(&shared));
        assert!(!uc.entry_heuristic_fired);
    }

    #[test]
    fn created_contracts_join_transitively() {
        let eoa = addr(0x11);
        let attack = addr(0x22);
        let worker = addr(0x33);
        let helper = addr(0x44);
        let mut entry = frame(eoa, attack, 0, CallOp::Call);
        let mut create_worker = frame(attack, worker, 1, CallOp::Create);
        create_worker.children = vec![frame(worker, helper, 2, CallOp::Create)];
        entry.children = vec![create_worker];
        let uc = identify_user_controlled(&trace_with(entry, eoa), &BTreeSet::new());
        assert!(uc.contains(&attack));
        assert!(uc.contains(&worker));
        assert!(uc.contains(&helper));
        assert_eq!(uc.len(), 4);
    }

    fn seq(actions: Vec<TransferAction>) -> UserInvocation {
        UserInvocation {
            index: 0,
            transfers: actions
                .into_iter()
                .enumerate()
                .map(|(i, action)| SequencedTransfer {
                    global_index: i as u32 + 1,
                    action,
                })
                .collect(),
        }
    }

    #[test]
    fn graph_collapses_uc_and_null_nodes() {
        let eoa = addr(0x11);
        let proxy = addr(0x22);
        let pool = addr(0x33);
        let token = addr(0xaa);
        let uc = UserControlledSet::from_accounts([eoa, proxy]);
        let inv = seq(vec![
            TransferAction {
                token,
                sender: eoa,
                receiver: pool,
                amount: TokenAmount::from_u128(5),
                kind: TransferKind::Transferring,
            },
            TransferAction {
                token,
                sender: Address::ZERO,
                receiver: proxy,
                amount: TokenAmount::from_u128(2),
                kind: TransferKind::Minting,
            },
        ]);
        let g = build_graph(&inv, &uc);
        assert_eq!(g.edges.len(), 2);
        assert_eq!(g.edges[0].source, TgNode::Uc);
        assert_eq!(g.edges[0].target, TgNode::Account(pool));
        assert_eq!(g.edges[1].source, TgNode::Null);
        assert_eq!(g.edges[1].target, TgNode::Uc);
        assert_eq!(g.edges[0].time_index, 1);
        assert_eq!(g.edges[1].time_index, 2);
        assert_eq!(
            g.nodes,
            BTreeSet::from([TgNode::Uc, TgNode::Null, TgNode::Account(pool)])
        );
    }

    #[test]
    fn dot_output_labels_edges_with_time_symbol_amount() {
        let eoa = addr(0x11);
        let pool = addr(0x33);
        let token = addr(0xaa);
        let uc = UserControlledSet::from_accounts([eoa]);
        let inv = seq(vec![TransferAction {
            token,
            sender: eoa,
            receiver: pool,
            amount: TokenAmount::from_u128(100),
            kind: TransferKind::Transferring,
        }]);
        let g = build_graph(&inv, &uc);
        let registry = TokenRegistry::new([Token {
            address: token,
            symbol: "WETH".into(),
            decimals: Some(18),
        }]);
        let dot = to_dot(&g, &registry);
        assert!(dot.contains("digraph invocation_0 {"));
        assert!(dot.contains("\"UC\" [shape=box]"));
        assert!(dot.contains("[label=\"T1:WETH:100\"]"));
    }
}
