//! Recovery of DeFi operations from a transfer graph: swap cycles, then
//! deposit/withdraw/borrow pairings, then stake/claim singletons, merged
//! under a precedence that stops one transfer witnessing two stories.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{TgEdge, TgNode, TransferGraph};
use crate::ingest::TransferKind;
use crate::primitives::Address;

#[derive(Debug, Error)]
pub enum RecoverError {
    #[error("swap-cycle search exceeded the path budget ({visited} paths visited)")]
    SearchBudgetExceeded { visited: usize },
}

/// Default ceiling on partial paths the swap-cycle search may extend.
pub const DEFAULT_PATH_BUDGET: usize = 1_000_000;

/// What a recovered operation is, with the token/contract roles each kind has.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Operation {
    /// Token out of UC, through one or more pools, different token back in.
    Swap {
        token_in: Address,
        token_out: Address,
        pools: Vec<Address>,
    },
    /// Token out of UC to a contract, proof token minted to UC afterwards.
    Deposit {
        token: Address,
        proof: Address,
        contract: Address,
    },
    /// Proof token burned from UC, then a contract pays tokens back in.
    Withdraw {
        proof: Address,
        token: Address,
        contract: Address,
    },
    /// Contract pays tokens to UC while a different debt token is minted.
    Borrow {
        token: Address,
        debt: Address,
        contract: Address,
    },
    /// Token out of UC to a contract with nothing minted back afterwards.
    Stake { token: Address, contract: Address },
    /// Contract pays tokens to UC with no earlier burn from UC.
    Claim { token: Address, contract: Address },
}

impl Operation {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Operation::Swap { .. } => "swap",
            Operation::Deposit { .. } => "deposit",
            Operation::Withdraw { .. } => "withdraw",
            Operation::Borrow { .. } => "borrow",
            Operation::Stake { .. } => "stake",
            Operation::Claim { .. } => "claim",
        }
    }

    /// The contract accounts this operation touches: the pools of a swap,
    /// otherwise the single counterparty contract.
    pub fn contracts(&self) -> Vec<Address> {
        match self {
            Operation::Swap { pools, .. } => pools.clone(),
            Operation::Deposit { contract, .. }
            | Operation::Withdraw { contract, .. }
            | Operation::Borrow { contract, .. }
            | Operation::Stake { contract, .. }
            | Operation::Claim { contract, .. } => vec![*contract],
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Operation::Swap { .. } => 0,
            Operation::Deposit { .. } | Operation::Withdraw { .. } | Operation::Borrow { .. } => 1,
            Operation::Stake { .. } | Operation::Claim { .. } => 2,
        }
    }
}

/// A recovered operation anchored to its invocation and edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeFiOperation {
    #[serde(flatten)]
    pub op: Operation,
    /// Which invocation's graph this came from.
    pub invocation: usize,
    /// Time indices (1-based, within the invocation) of the witnessing edges,
    /// in witness order.
    pub edge_refs: Vec<u32>,
    /// Transaction-wide emission span of the witnessing edges: (min, max).
    pub span: (u32, u32),
}

/// A contract labeled as a pool because a swap routed through it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PoolLabel {
    pub address: Address,
    /// Index into the operation list of the swap that did the labeling.
    pub labeled_by: usize,
}

fn span_of(graph: &TransferGraph, refs: &[u32]) -> (u32, u32) {
    let mut lo = u32::MAX;
    let mut hi = 0;
    for &r in refs {
        let g = graph.edge(r).global_index;
        lo = lo.min(g);
        hi = hi.max(g);
    }
    (lo, hi)
}

fn make_op(graph: &TransferGraph, op: Operation, edge_refs: Vec<u32>) -> DeFiOperation {
    let span = span_of(graph, &edge_refs);
    DeFiOperation {
        op,
        invocation: graph.invocation,
        edge_refs,
        span,
    }
}

fn account_of(node: &TgNode) -> Option<Address> {
    match node {
        TgNode::Account(a) => Some(*a),
        _ => None,
    }
}

/// Finds every swap cycle: a strictly time-increasing chain of Transferring
/// edges that leaves UC, walks only non-UC accounts, returns to UC, and comes
/// back with a different token than it left with. Intermediate accounts are
/// the pools. Search effort is capped by `budget` extended paths.
pub fn recover_swaps(
    graph: &TransferGraph,
    budget: usize,
) -> Result<Vec<DeFiOperation>, RecoverError> {
    let transferring: Vec<&TgEdge> = graph
        .edges
        .iter()
        .filter(|e| e.action.kind == TransferKind::Transferring)
        .collect();

    let mut found: Vec<Vec<u32>> = Vec::new();
    let mut visited = 0usize;

    fn extend<'a>(
        edges: &[&'a TgEdge],
        path: &mut Vec<&'a TgEdge>,
        found: &mut Vec<Vec<u32>>,
        visited: &mut usize,
        budget: usize,
    ) -> Result<(), RecoverError> {
        let (last_time, last_target) = {
            let last = path.last().expect("path starts non-empty");
            (last.time_index, last.target)
        };
        for next in edges {
            if next.time_index <= last_time || next.source != last_target {
                continue;
            }
            *visited += 1;
            if *visited > budget {
                return Err(RecoverError::SearchBudgetExceeded { visited: *visited });
            }
            if next.target == TgNode::Uc {
                if next.action.token != path[0].action.token {
                    let mut refs: Vec<u32> = path.iter().map(|e| e.time_index).collect();
                    refs.push(next.time_index);
                    found.push(refs);
                }
                // A cycle closes at its first return to UC; longer chains
                // through UC are separate cycles found from their own start.
                continue;
            }
            path.push(next);
            let r = extend(edges, path, found, visited, budget);
            path.pop();
            r?;
        }
        Ok(())
    }

    for start in &transferring {
        if start.source != TgNode::Uc {
            continue;
        }
        visited += 1;
        if visited > budget {
            return Err(RecoverError::SearchBudgetExceeded { visited });
        }
        if start.target == TgNode::Uc {
            // Self-transfer: closes immediately with the same token; never a swap.
            continue;
        }
        let mut path = vec![*start];
        extend(&transferring, &mut path, &mut found, &mut visited, budget)?;
    }

    found.sort();
    Ok(found
        .into_iter()
        .map(|refs| {
            let first = graph.edge(refs[0]);
            let last = graph.edge(*refs.last().expect("cycle has edges"));
            let mut pools = Vec::new();
            for r in &refs[..refs.len() - 1] {
                if let Some(a) = account_of(&graph.edge(*r).target) {
                    if !pools.contains(&a) {
                        pools.push(a);
                    }
                }
            }
            make_op(
                graph,
                Operation::Swap {
                    token_in: first.action.token,
                    token_out: last.action.token,
                    pools,
                },
                refs,
            )
        })
        .collect())
}

/// Reference enumerator for swap cycles: checks every strictly
/// time-increasing subsequence of Transferring edges against the cycle
/// conditions. Exponential; exists to cross-check `recover_swaps` on small
/// graphs.
pub fn enumerate_swaps_exhaustive(graph: &TransferGraph) -> Vec<DeFiOperation> {
    let transferring: Vec<&TgEdge> = graph
        .edges
        .iter()
        .filter(|e| e.action.kind == TransferKind::Transferring)
        .collect();
    let n = transferring.len();
    assert!(n <= 20, "exhaustive enumeration is for small graphs");
    let mut found: Vec<Vec<u32>> = Vec::new();
    for mask in 1u32..(1 << n) {
        let chain: Vec<&TgEdge> = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| transferring[i])
            .collect();
        if chain.len() < 2 {
            continue;
        }
        if chain[0].source != TgNode::Uc {
            continue;
        }
        if chain.last().unwrap().target != TgNode::Uc {
            continue;
        }
        let links_ok = chain.windows(2).all(|w| w[0].target == w[1].source);
        if !links_ok {
            continue;
        }
        let no_early_uc = chain[..chain.len() - 1].iter().all(|e| e.target != TgNode::Uc);
        if !no_early_uc {
            continue;
        }
        if chain[0].action.token == chain.last().unwrap().action.token {
            continue;
        }
        found.push(chain.iter().map(|e| e.time_index).collect());
    }
    found.sort();
    found
        .into_iter()
        .map(|refs| {
            let first = graph.edge(refs[0]);
            let last = graph.edge(*refs.last().unwrap());
            let mut pools = Vec::new();
            for r in &refs[..refs.len() - 1] {
                if let Some(a) = account_of(&graph.edge(*r).target) {
                    if !pools.contains(&a) {
                        pools.push(a);
                    }
                }
            }
            make_op(
                graph,
                Operation::Swap {
                    token_in: first.action.token,
                    token_out: last.action.token,
                    pools,
                },
                refs,
            )
        })
        .collect()
}

/// Deposits: UC→contract transfer paired with the nearest later mint to UC
/// of a different token (the proof). Each transfer and each mint witness at
/// most one deposit.
pub fn recover_deposits(graph: &TransferGraph) -> Vec<DeFiOperation> {
    let mut used_mints: BTreeSet<u32> = BTreeSet::new();
    let mut out = Vec::new();
    for e in &graph.edges {
        if e.action.kind != TransferKind::Transferring || e.source != TgNode::Uc {
            continue;
        }
        let Some(contract) = account_of(&e.target) else {
            continue;
        };
        let mint = graph.edges.iter().find(|m| {
            m.time_index > e.time_index
                && m.action.kind == TransferKind::Minting
                && m.target == TgNode::Uc
                && m.action.token != e.action.token
                && !used_mints.contains(&m.time_index)
        });
        if let Some(mint) = mint {
            used_mints.insert(mint.time_index);
            out.push(make_op(
                graph,
                Operation::Deposit {
                    token: e.action.token,
                    proof: mint.action.token,
                    contract,
                },
                vec![e.time_index, mint.time_index],
            ));
        }
    }
    out
}

/// Withdrawals: a burn from UC paired with the nearest later contract→UC
/// transfer. The burned token is the proof; the incoming token is what the
/// position pays out (the two may coincide).
pub fn recover_withdraws(graph: &TransferGraph) -> Vec<DeFiOperation> {
    let mut used_ins: BTreeSet<u32> = BTreeSet::new();
    let mut out = Vec::new();
    for e in &graph.edges {
        if e.action.kind != TransferKind::Burning || e.source != TgNode::Uc {
            continue;
        }
        let pay = graph.edges.iter().find(|p| {
            p.time_index > e.time_index
                && p.action.kind == TransferKind::Transferring
                && p.target == TgNode::Uc
                && account_of(&p.source).is_some()
                && !used_ins.contains(&p.time_index)
        });
        if let Some(pay) = pay {
            used_ins.insert(pay.time_index);
            out.push(make_op(
                graph,
                Operation::Withdraw {
                    proof: e.action.token,
                    token: pay.action.token,
                    contract: account_of(&pay.source).expect("checked above"),
                },
                vec![e.time_index, pay.time_index],
            ));
        }
    }
    out
}

/// Borrows: a contract→UC transfer paired with a mint to UC of a different
/// token (the debt marker). The nearest later mint wins; failing that, the
/// nearest earlier one — some lenders mint the debt token before paying out.
pub fn recover_borrows(graph: &TransferGraph) -> Vec<DeFiOperation> {
    let mut used_mints: BTreeSet<u32> = BTreeSet::new();
    let mut out = Vec::new();
    for e in &graph.edges {
        if e.action.kind != TransferKind::Transferring || e.target != TgNode::Uc {
            continue;
        }
        let Some(contract) = account_of(&e.source) else {
            continue;
        };
        let candidate = |m: &&TgEdge| {
            m.action.kind == TransferKind::Minting
                && m.target == TgNode::Uc
                && m.action.token != e.action.token
                && !used_mints.contains(&m.time_index)
        };
        let mint = graph
            .edges
            .iter()
            .filter(|m| m.time_index > e.time_index)
            .find(candidate)
            .or_else(|| {
                graph
                    .edges
                    .iter()
                    .filter(|m| m.time_index < e.time_index)
                    .filter(candidate)
                    .last()
            });
        if let Some(mint) = mint {
            used_mints.insert(mint.time_index);
            out.push(make_op(
                graph,
                Operation::Borrow {
                    token: e.action.token,
                    debt: mint.action.token,
                    contract,
                },
                vec![e.time_index, mint.time_index],
            ));
        }
    }
    out
}

/// Stakes: a UC→contract transfer after which nothing is ever minted to UC
/// in this invocation — the donation/direct-transfer shape.
pub fn recover_stakes(graph: &TransferGraph) -> Vec<DeFiOperation> {
    let mut out = Vec::new();
    for e in &graph.edges {
        if e.action.kind != TransferKind::Transferring || e.source != TgNode::Uc {
            continue;
        }
        let Some(contract) = account_of(&e.target) else {
            continue;
        };
        let minted_later = graph.edges.iter().any(|m| {
            m.time_index > e.time_index
                && m.action.kind == TransferKind::Minting
                && m.target == TgNode::Uc
        });
        if !minted_later {
            out.push(make_op(
                graph,
                Operation::Stake {
                    token: e.action.token,
                    contract,
                },
                vec![e.time_index],
            ));
        }
    }
    out
}

/// Claims: a contract→UC transfer with no burn from UC anywhere earlier in
/// the invocation — rewards arriving without a surrendered position.
pub fn recover_claims(graph: &TransferGraph) -> Vec<DeFiOperation> {
    let mut out = Vec::new();
    for e in &graph.edges {
        if e.action.kind != TransferKind::Transferring || e.target != TgNode::Uc {
            continue;
        }
        let Some(contract) = account_of(&e.source) else {
            continue;
        };
        let burned_before = graph.edges.iter().any(|b| {
            b.time_index < e.time_index
                && b.action.kind == TransferKind::Burning
                && b.source == TgNode::Uc
        });
        if !burned_before {
            out.push(make_op(
                graph,
                Operation::Claim {
                    token: e.action.token,
                    contract,
                },
                vec![e.time_index],
            ));
        }
    }
    out
}

/// Runs all six recoverers and merges their results under precedence
/// swap > (deposit | withdraw | borrow) > (stake | claim): a Transferring
/// edge consumed by a higher class cannot also witness a lower one. Mint and
/// burn edges do not consume. The result is sorted by emission span, then
/// precedence, then witnessing edges.
pub fn recover_all(
    graph: &TransferGraph,
    budget: usize,
) -> Result<Vec<DeFiOperation>, RecoverError> {
    let swaps = recover_swaps(graph, budget)?;

    let transferring_refs = |op: &DeFiOperation| -> Vec<u32> {
        op.edge_refs
            .iter()
            .copied()
            .filter(|&r| graph.edge(r).action.kind == TransferKind::Transferring)
            .collect()
    };

    let mut consumed: BTreeSet<u32> = BTreeSet::new();
    for op in &swaps {
        consumed.extend(transferring_refs(op));
    }

    let mut mid: Vec<DeFiOperation> = Vec::new();
    for op in recover_deposits(graph)
        .into_iter()
        .chain(recover_withdraws(graph))
        .chain(recover_borrows(graph))
    {
        if transferring_refs(&op).iter().all(|r| !consumed.contains(r)) {
            mid.push(op);
        }
    }
    for op in &mid {
        consumed.extend(transferring_refs(op));
    }

    let mut low: Vec<DeFiOperation> = Vec::new();
    for op in recover_stakes(graph).into_iter().chain(recover_claims(graph)) {
        if transferring_refs(&op).iter().all(|r| !consumed.contains(r)) {
            low.push(op);
        }
    }

    let mut all: Vec<DeFiOperation> = swaps.into_iter().chain(mid).chain(low).collect();
    all.sort_by(|a, b| {
        (a.span.0, a.op.precedence(), &a.edge_refs).cmp(&(b.span.0, b.op.precedence(), &b.edge_refs))
    });
    Ok(all)
}

/// Collects the pool labels implied by the swaps in an operation list.
pub fn pool_labels(ops: &[DeFiOperation]) -> Vec<PoolLabel> {
    let mut out = Vec::new();
    for (i, op) in ops.iter().enumerate() {
        if let Operation::Swap { pools, .. } = &op.op {
            for p in pools {
                out.push(PoolLabel {
                    address: *p,
                    labeled_by: i,
                });
            }
        }
    }
    out
}
