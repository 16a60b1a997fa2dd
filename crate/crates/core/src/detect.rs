//! Attack-pattern matching and the end-to-end scan pipeline.
//!
//! Eight templates pair recovered operations with price-change verdicts.
//! Each template names two operations plus a price movement that must sit
//! in a specific temporal position relative to them; a verdict's position
//! is the time span of the earliest operation, in the verdict's own
//! invocation, that touches the verdict's contract (prices do not move on
//! their own — some operation's balance changes moved them).

use crate::graph::{build_graph, identify_user_controlled, TransferGraph};
use crate::infer::{
    infer_price_changes, InferContext, InferenceBackendConfig, PriceChangeVerdict, PriceDirection,
};
use crate::ingest::{
    compute_balance_deltas, slice_user_invocations, BalanceDelta, IngestError, ScanInput,
};
use crate::primitives::{Address, TokenRegistry};
use crate::recover::{recover_all, DeFiOperation, Operation, RecoverError, DEFAULT_PATH_BUDGET};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::{Duration, Instant};

/// The eight manipulation templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PatternId {
    I,
    II,
    III,
    IV,
    V,
    VI,
    VII,
    VIII,
}

/// Which operation pairing a pattern is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PatternFamily {
    BuySell,
    DepositBorrow,
    StakeClaim,
    DepositWithdraw,
}

impl PatternId {
    pub const ALL: [PatternId; 8] = [
        PatternId::I,
        PatternId::II,
        PatternId::III,
        PatternId::IV,
        PatternId::V,
        PatternId::VI,
        PatternId::VII,
        PatternId::VIII,
    ];

    pub fn family(self) -> PatternFamily {
        match self {
            PatternId::I | PatternId::II => PatternFamily::BuySell,
            PatternId::III | PatternId::IV => PatternFamily::DepositBorrow,
            PatternId::V | PatternId::VI => PatternFamily::StakeClaim,
            PatternId::VII | PatternId::VIII => PatternFamily::DepositWithdraw,
        }
    }

    fn rank(self) -> u8 {
        match self {
            PatternId::I => 1,
            PatternId::II => 2,
            PatternId::III => 3,
            PatternId::IV => 4,
            PatternId::V => 5,
            PatternId::VI => 6,
            PatternId::VII => 7,
            PatternId::VIII => 8,
        }
    }
}

impl std::fmt::Display for PatternId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

/// One matched template instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AttackFinding {
    pub pattern: PatternId,
    pub family: PatternFamily,
    /// Indices into the report's `operations`, in template-step order.
    pub operations: Vec<usize>,
    /// Indices into the report's `verdicts`: every verdict satisfying one
    /// of the pattern's price-change alternatives.
    pub verdicts: Vec<usize>,
    /// Invocation of the template's first operation.
    pub invocation_index: usize,
    pub narrative: String,
}

/// Wall-clock cost of each pipeline stage, in milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StageTimings {
    pub decode_ms: u64,
    pub graph_ms: u64,
    pub recover_ms: u64,
    pub infer_ms: u64,
    pub match_ms: u64,
}

/// Full scan output for one transaction.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DetectionReport {
    pub tx_hash: String,
    pub findings: Vec<AttackFinding>,
    pub operations: Vec<DeFiOperation>,
    pub verdicts: Vec<PriceChangeVerdict>,
    pub timings: StageTimings,
    pub warnings: Vec<String>,
}

/// Scan-wide knobs.
#[derive(Debug, Clone)]
pub struct DetectConfig {
    pub backend: InferenceBackendConfig,
    pub bundles_dir: Option<PathBuf>,
    /// Verdicts below this confidence cannot participate in matching.
    pub min_confidence: u8,
    /// Whole-transaction wall-clock cap; on expiry the scan returns what it
    /// has, with a TimeoutWarning.
    pub timeout: Duration,
    /// Ceiling on partial paths the swap-cycle search may extend.
    pub search_budget: usize,
    /// Router/aggregator entry points that must never be absorbed into the
    /// user-controlled set.
    pub known_routers: BTreeSet<Address>,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            backend: InferenceBackendConfig::default(),
            bundles_dir: None,
            min_confidence: 6,
            timeout: Duration::from_secs(300),
            search_budget: DEFAULT_PATH_BUDGET,
            known_routers: BTreeSet::new(),
        }
    }
}

/// A verdict admitted to matching, carrying the span of the operation whose
/// balance changes produced it.
struct AnchoredVerdict<'a> {
    index: usize,
    verdict: &'a PriceChangeVerdict,
    span: (u32, u32),
}

fn anchor_verdicts<'a>(
    operations: &[DeFiOperation],
    verdicts: &'a [PriceChangeVerdict],
    min_confidence: u8,
) -> Vec<AnchoredVerdict<'a>> {
    verdicts
        .iter()
        .enumerate()
        .filter(|(_, v)| v.confidence >= min_confidence)
        .filter_map(|(index, verdict)| {
            operations
                .iter()
                .filter(|op| {
                    op.invocation == verdict.invocation
                        && op.op.contracts().contains(&verdict.contract)
                })
                .map(|op| op.span)
                .min_by_key(|span| (span.0, span.1))
                .map(|span| AnchoredVerdict {
                    index,
                    verdict,
                    span,
                })
        })
        .collect()
}

/// The price movement sits strictly between the two operations.
fn between(a: &AnchoredVerdict, first: &DeFiOperation, second: &DeFiOperation) -> bool {
    first.span.1 < a.span.0 && a.span.1 < second.span.0
}

/// The price movement happens strictly before the first operation.
fn before(a: &AnchoredVerdict, first: &DeFiOperation) -> bool {
    a.span.1 < first.span.0
}

/// Like [`between`], but the window opens at the first operation's own start
/// so the first operation itself may be the thing that moved the price.
fn from_first_until(a: &AnchoredVerdict, first: &DeFiOperation, second: &DeFiOperation) -> bool {
    first.span.0 <= a.span.0 && a.span.1 < second.span.0
}

fn verdict_is(a: &AnchoredVerdict, token: Address, dir: PriceDirection, contracts: &[Address]) -> bool {
    a.verdict.token == token && a.verdict.direction == dir && contracts.contains(&a.verdict.contract)
}

/// Matches all eight templates over recovered operations and anchored
/// verdicts. One finding per (pattern, operation pair) carrying every
/// qualifying verdict; findings are ordered by (pattern, first operation's
/// start, operation indices).
pub fn match_patterns(
    operations: &[DeFiOperation],
    verdicts: &[PriceChangeVerdict],
    min_confidence: u8,
    registry: &TokenRegistry,
) -> Vec<AttackFinding> {
    let anchored = anchor_verdicts(operations, verdicts, min_confidence);
    let mut findings = Vec::new();

    let push = |pattern: PatternId,
                    ops: (usize, usize),
                    hits: Vec<usize>,
                    findings: &mut Vec<AttackFinding>| {
        if hits.is_empty() {
            return;
        }
        let narrative = narrate(pattern, ops, &hits, operations, verdicts, registry);
        findings.push(AttackFinding {
            pattern,
            family: pattern.family(),
            operations: vec![ops.0, ops.1],
            verdicts: hits,
            invocation_index: operations[ops.0].invocation,
            narrative,
        });
    };

    for (i, first) in operations.iter().enumerate() {
        for (j, second) in operations.iter().enumerate() {
            if i == j || first.span.1 >= second.span.0 {
                continue;
            }
            match (&first.op, &second.op) {
                (
                    Operation::Swap {
                        token_in: x,
                        token_out: y1,
                        pools: buy_pools,
                    },
                    Operation::Swap {
                        token_in: y2,
                        token_out: z,
                        pools: sell_pools,
                    },
                ) if y1 == y2 => {
                    let y = *y1;
                    // Pattern I: the bought token's price at the sell venue
                    // rises (or the target token's falls) between the two
                    // swaps — the buy itself may be the mover.
                    let hits: Vec<usize> = anchored
                        .iter()
                        .filter(|a| from_first_until(a, first, second))
                        .filter(|a| {
                            verdict_is(a, y, PriceDirection::Increase, sell_pools)
                                || verdict_is(a, *z, PriceDirection::Decrease, sell_pools)
                        })
                        .map(|a| a.index)
                        .collect();
                    push(PatternId::I, (i, j), hits, &mut findings);

                    // Pattern II: the distortion precedes both swaps.
                    let hits: Vec<usize> = anchored
                        .iter()
                        .filter(|a| before(a, first))
                        .filter(|a| {
                            verdict_is(a, *x, PriceDirection::Increase, buy_pools)
                                || verdict_is(a, y, PriceDirection::Decrease, buy_pools)
                                || verdict_is(a, y, PriceDirection::Increase, sell_pools)
                                || verdict_is(a, *z, PriceDirection::Decrease, sell_pools)
                        })
                        .map(|a| a.index)
                        .collect();
                    push(PatternId::II, (i, j), hits, &mut findings);
                }
                (
                    Operation::Deposit { token: x, .. },
                    Operation::Borrow {
                        token: z,
                        contract: borrow_contract,
                        ..
                    },
                ) => {
                    let clauses = |a: &&AnchoredVerdict| {
                        verdict_is(a, *x, PriceDirection::Increase, &[*borrow_contract])
                            || verdict_is(a, *z, PriceDirection::Decrease, &[*borrow_contract])
                    };
                    let hits: Vec<usize> = anchored
                        .iter()
                        .filter(|a| between(a, first, second))
                        .filter(clauses)
                        .map(|a| a.index)
                        .collect();
                    push(PatternId::III, (i, j), hits, &mut findings);

                    let hits: Vec<usize> = anchored
                        .iter()
                        .filter(|a| before(a, first))
                        .filter(clauses)
                        .map(|a| a.index)
                        .collect();
                    push(PatternId::IV, (i, j), hits, &mut findings);
                }
                (
                    Operation::Stake {
                        token: x,
                        contract: stake_contract,
                    },
                    Operation::Claim {
                        token: y,
                        contract: claim_contract,
                    },
                ) => {
                    let hits: Vec<usize> = anchored
                        .iter()
                        .filter(|a| between(a, first, second))
                        .filter(|a| verdict_is(a, *y, PriceDirection::Decrease, &[*claim_contract]))
                        .map(|a| a.index)
                        .collect();
                    push(PatternId::V, (i, j), hits, &mut findings);

                    let hits: Vec<usize> = anchored
                        .iter()
                        .filter(|a| before(a, first))
                        .filter(|a| {
                            verdict_is(a, *x, PriceDirection::Increase, &[*stake_contract])
                                || verdict_is(a, *y, PriceDirection::Decrease, &[*claim_contract])
                        })
                        .map(|a| a.index)
                        .collect();
                    push(PatternId::VI, (i, j), hits, &mut findings);
                }
                (
                    Operation::Deposit {
                        token: x,
                        proof: y1,
                        contract: deposit_contract,
                    },
                    Operation::Withdraw {
                        proof: y2,
                        token: z,
                        contract: withdraw_contract,
                    },
                ) if y1 == y2 => {
                    let y = *y1;
                    let hits: Vec<usize> = anchored
                        .iter()
                        .filter(|a| between(a, first, second))
                        .filter(|a| {
                            verdict_is(a, y, PriceDirection::Increase, &[*withdraw_contract])
                                || verdict_is(a, *z, PriceDirection::Decrease, &[*withdraw_contract])
                        })
                        .map(|a| a.index)
                        .collect();
                    push(PatternId::VII, (i, j), hits, &mut findings);

                    let hits: Vec<usize> = anchored
                        .iter()
                        .filter(|a| before(a, first))
                        .filter(|a| {
                            verdict_is(a, *x, PriceDirection::Increase, &[*deposit_contract])
                                || verdict_is(a, y, PriceDirection::Decrease, &[*deposit_contract])
                                || verdict_is(a, y, PriceDirection::Increase, &[*withdraw_contract])
                                || verdict_is(a, *z, PriceDirection::Decrease, &[*withdraw_contract])
                        })
                        .map(|a| a.index)
                        .collect();
                    push(PatternId::VIII, (i, j), hits, &mut findings);
                }
                _ => {}
            }
        }
    }

    findings.sort_by(|a, b| {
        (a.pattern.rank(), operations[a.operations[0]].span.0, &a.operations).cmp(&(
            b.pattern.rank(),
            operations[b.operations[0]].span.0,
            &b.operations,
        ))
    });
    findings
}

fn describe_op(op: &Operation, registry: &TokenRegistry) -> String {
    match op {
        Operation::Swap {
            token_in,
            token_out,
            pools,
        } => {
            let route = pools
                .iter()
                .map(|p| registry.name(p))
                .collect::<Vec<_>>()
                .join("→");
            format!(
                "swap {} for {} via {}",
                registry.name(token_in),
                registry.name(token_out),
                route
            )
        }
        Operation::Deposit {
            token,
            proof,
            contract,
        } => format!(
            "deposit {} into {} receiving {}",
            registry.name(token),
            registry.name(contract),
            registry.name(proof)
        ),
        Operation::Withdraw {
            proof,
            token,
            contract,
        } => format!(
            "redeem {} at {} for {}",
            registry.name(proof),
            registry.name(contract),
            registry.name(token)
        ),
        Operation::Borrow {
            token,
            debt,
            contract,
        } => format!(
            "borrow {} from {} against {}",
            registry.name(token),
            registry.name(contract),
            registry.name(debt)
        ),
        Operation::Stake { token, contract } => format!(
            "move {} into {} unprompted",
            registry.name(token),
            registry.name(contract)
        ),
        Operation::Claim { token, contract } => format!(
            "claim {} from {}",
            registry.name(token),
            registry.name(contract)
        ),
    }
}

fn narrate(
    pattern: PatternId,
    ops: (usize, usize),
    hits: &[usize],
    operations: &[DeFiOperation],
    verdicts: &[PriceChangeVerdict],
    registry: &TokenRegistry,
) -> String {
    let moves = hits
        .iter()
        .map(|&vi| {
            let v = &verdicts[vi];
            format!(
                "price of {} at {} {} ({} of 10)",
                registry.name(&v.token),
                registry.name(&v.contract),
                match v.direction {
                    PriceDirection::Increase => "rises",
                    PriceDirection::Decrease => "falls",
                },
                v.confidence
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    let first = describe_op(&operations[ops.0].op, registry);
    let second = describe_op(&operations[ops.1].op, registry);
    match pattern {
        // Movement sandwiched between the steps.
        PatternId::I | PatternId::III | PatternId::V | PatternId::VII => {
            format!("pattern {pattern}: {first}; then {moves}; then {second}")
        }
        // Movement precedes both steps.
        PatternId::II | PatternId::IV | PatternId::VI | PatternId::VIII => {
            format!("pattern {pattern}: {moves}; then {first}; then {second}")
        }
    }
}

fn timeout_warning(stage: &str, cap: Duration) -> String {
    format!(
        "TimeoutWarning: {:.0} s scan cap reached during {stage}; later stages skipped and this report is partial",
        cap.as_secs_f64()
    )
}

/// Runs the whole pipeline on one transaction. Only ingest problems are
/// fatal; everything downstream degrades to warnings, and blowing the time
/// cap yields a partial report rather than an error.
pub fn detect(input: &ScanInput, cfg: &DetectConfig) -> Result<DetectionReport, IngestError> {
    let started = Instant::now();
    let over = |_: &str| started.elapsed() >= cfg.timeout;
    let mut timings = StageTimings::default();
    let mut warnings = Vec::new();
    let tx_hash = input.trace.tx_hash.to_string();

    let finish = |findings, operations, verdicts, timings, warnings| DetectionReport {
        tx_hash: tx_hash.clone(),
        findings,
        operations,
        verdicts,
        timings,
        warnings,
    };

    // Decode: user-controlled set, invocation slices, balance deltas.
    let stage = Instant::now();
    let uc = identify_user_controlled(&input.trace, &cfg.known_routers);
    let invocations = slice_user_invocations(&input.trace, &uc);
    let deltas: Vec<Vec<BalanceDelta>> = invocations
        .iter()
        .map(compute_balance_deltas)
        .collect::<Result<_, _>>()?;
    timings.decode_ms = stage.elapsed().as_millis() as u64;
    if over("decode") {
        warnings.push(timeout_warning("decode", cfg.timeout));
        return Ok(finish(vec![], vec![], vec![], timings, warnings));
    }

    // Per-invocation transfer graphs.
    let stage = Instant::now();
    let graphs: Vec<TransferGraph> = invocations.iter().map(|inv| build_graph(inv, &uc)).collect();
    timings.graph_ms = stage.elapsed().as_millis() as u64;
    if over("graph construction") {
        warnings.push(timeout_warning("graph construction", cfg.timeout));
        return Ok(finish(vec![], vec![], vec![], timings, warnings));
    }

    // Operation recovery, with both the per-invocation search budget and
    // the global clock able to cut it short.
    let stage = Instant::now();
    let mut operations: Vec<DeFiOperation> = Vec::new();
    for graph in &graphs {
        if over("operation recovery") {
            warnings.push(timeout_warning("operation recovery", cfg.timeout));
            timings.recover_ms = stage.elapsed().as_millis() as u64;
            return Ok(finish(vec![], operations, vec![], timings, warnings));
        }
        match recover_all(graph, cfg.search_budget) {
            Ok(ops) => operations.extend(ops),
            Err(RecoverError::SearchBudgetExceeded { visited }) => {
                warnings.push(format!(
                    "TimeoutWarning: swap-cycle search in invocation {} stopped after {visited} paths; that invocation's operations are omitted",
                    graph.invocation
                ));
            }
        }
    }
    timings.recover_ms = stage.elapsed().as_millis() as u64;
    if over("operation recovery") {
        warnings.push(timeout_warning("operation recovery", cfg.timeout));
        return Ok(finish(vec![], operations, vec![], timings, warnings));
    }

    // Price inference.
    let stage = Instant::now();
    let ctx = InferContext {
        operations: &operations,
        pools: &input.pools,
        invocation_deltas: &deltas,
        bundles_dir: cfg.bundles_dir.as_deref(),
        registry: &input.tokens,
        uc: &uc,
    };
    let (verdicts, infer_warnings) = infer_price_changes(&ctx, &cfg.backend);
    warnings.extend(infer_warnings);
    timings.infer_ms = stage.elapsed().as_millis() as u64;
    if over("price inference") {
        warnings.push(timeout_warning("price inference", cfg.timeout));
        return Ok(finish(vec![], operations, verdicts, timings, warnings));
    }

    // Pattern matching.
    let stage = Instant::now();
    let findings = match_patterns(&operations, &verdicts, cfg.min_confidence, &input.tokens);
    timings.match_ms = stage.elapsed().as_millis() as u64;

    Ok(finish(findings, operations, verdicts, timings, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amm::PoolConfig;
    use crate::infer::VerdictBackend;
    use crate::ingest::{CallFrame, CallOp, RawLog, ScanInput, TransactionTrace, TRANSFER_TOPIC};
    use crate::primitives::{Selector, TokenAmount, Word};

    fn addr(n: u8) -> Address {
        Address([n; 20])
    }

    fn op(kind: Operation, invocation: usize, span: (u32, u32)) -> DeFiOperation {
        DeFiOperation {
            op: kind,
            invocation,
            edge_refs: vec![],
            span,
        }
    }

    fn swap(token_in: Address, token_out: Address, pool: Address) -> Operation {
        Operation::Swap {
            token_in,
            token_out,
            pools: vec![pool],
        }
    }

    fn verdict(
        token: Address,
        contract: Address,
        direction: PriceDirection,
        confidence: u8,
        invocation: usize,
    ) -> PriceChangeVerdict {
        PriceChangeVerdict {
            token,
            contract,
            direction,
            confidence,
            backend: VerdictBackend::Analytic,
            invocation,
        }
    }

    fn reg() -> TokenRegistry {
        TokenRegistry::default()
    }

    const X: u8 = 1;
    const Y: u8 = 2;
    const Z: u8 = 3;
    const POOL: u8 = 9;
    const POOL2: u8 = 10;
    const VAULT: u8 = 11;

    #[test]
    fn pattern_i_matches_round_trip_with_pump_between() {
        let ops = vec![
            op(swap(addr(X), addr(Y), addr(POOL)), 0, (1, 2)),
            op(swap(addr(Y), addr(X), addr(POOL)), 1, (3, 4)),
        ];
        let verdicts = vec![
            verdict(addr(Y), addr(POOL), PriceDirection::Increase, 10, 0),
            verdict(addr(X), addr(POOL), PriceDirection::Decrease, 10, 0),
            // Sell-swap's own price impact: anchored at op 1, outside the window.
            verdict(addr(Y), addr(POOL), PriceDirection::Decrease, 10, 1),
        ];
        let findings = match_patterns(&ops, &verdicts, 6, &reg());
        assert_eq!(findings.len(), 1);
        let f = &findings[0];
        assert_eq!(f.pattern, PatternId::I);
        assert_eq!(f.family, PatternFamily::BuySell);
        assert_eq!(f.operations, vec![0, 1]);
        assert_eq!(f.verdicts, vec![0, 1]);
        assert_eq!(f.invocation_index, 0);
        assert!(f.narrative.contains("pattern I"));
    }

    #[test]
    fn pattern_ii_matches_distortion_before_both_swaps() {
        let ops = vec![
            op(
                Operation::Stake {
                    token: addr(Y),
                    contract: addr(POOL),
                },
                0,
                (1, 1),
            ),
            op(swap(addr(X), addr(Y), addr(POOL)), 1, (2, 3)),
            op(swap(addr(Y), addr(Z), addr(POOL2)), 2, (4, 5)),
        ];
        let verdicts = vec![
            verdict(addr(X), addr(POOL), PriceDirection::Increase, 10, 0),
            verdict(addr(Y), addr(POOL), PriceDirection::Decrease, 10, 0),
        ];
        let findings = match_patterns(&ops, &verdicts, 6, &reg());
        assert_eq!(findings.len(), 1);
        let f = &findings[0];
        assert_eq!(f.pattern, PatternId::II);
        assert_eq!(f.operations, vec![1, 2]);
        assert_eq!(f.verdicts, vec![0, 1]);
    }

    #[test]
    fn pattern_iii_and_iv_depend_on_verdict_position() {
        let deposit = Operation::Deposit {
            token: addr(X),
            proof: addr(Y),
            contract: addr(VAULT),
        };
        let borrow = Operation::Borrow {
            token: addr(Z),
            debt: addr(4),
            contract: addr(POOL),
        };
        let donate = Operation::Stake {
            token: addr(Z),
            contract: addr(POOL),
        };

        // Donation between deposit and borrow → III.
        let ops = vec![
            op(deposit.clone(), 0, (1, 2)),
            op(donate.clone(), 1, (3, 3)),
            op(borrow.clone(), 2, (4, 5)),
        ];
        let verdicts = vec![verdict(addr(Z), addr(POOL), PriceDirection::Decrease, 10, 1)];
        let findings = match_patterns(&ops, &verdicts, 6, &reg());
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].pattern, PatternId::III);
        assert_eq!(findings[0].operations, vec![0, 2]);
        assert_eq!(findings[0].family, PatternFamily::DepositBorrow);

        // Donation before the deposit → IV.
        let ops = vec![
            op(donate, 0, (1, 1)),
            op(deposit, 1, (2, 3)),
            op(borrow, 2, (4, 5)),
        ];
        let verdicts = vec![verdict(addr(Z), addr(POOL), PriceDirection::Decrease, 10, 0)];
        let findings = match_patterns(&ops, &verdicts, 6, &reg());
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].pattern, PatternId::IV);
        assert_eq!(findings[0].operations, vec![1, 2]);
    }

    #[test]
    fn pattern_v_and_vi_cover_stake_claim() {
        let stake = Operation::Stake {
            token: addr(X),
            contract: addr(VAULT),
        };
        let claim = Operation::Claim {
            token: addr(Y),
            contract: addr(POOL),
        };
        let donate = Operation::Stake {
            token: addr(Y),
            contract: addr(POOL),
        };

        let ops = vec![
            op(stake.clone(), 0, (1, 1)),
            op(donate.clone(), 1, (2, 2)),
            op(claim.clone(), 2, (3, 3)),
        ];
        let verdicts = vec![verdict(addr(Y), addr(POOL), PriceDirection::Decrease, 10, 1)];
        let findings = match_patterns(&ops, &verdicts, 6, &reg());
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].pattern, PatternId::V);
        assert_eq!(findings[0].operations, vec![0, 2]);
        assert_eq!(findings[0].family, PatternFamily::StakeClaim);

        let ops = vec![
            op(donate, 0, (1, 1)),
            op(stake, 1, (2, 2)),
            op(claim, 2, (3, 3)),
        ];
        let verdicts = vec![verdict(addr(Y), addr(POOL), PriceDirection::Decrease, 10, 0)];
        let findings = match_patterns(&ops, &verdicts, 6, &reg());
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].pattern, PatternId::VI);
        assert_eq!(findings[0].operations, vec![1, 2]);
    }

    #[test]
    fn pattern_vii_and_viii_require_matching_proof() {
        let deposit = Operation::Deposit {
            token: addr(X),
            proof: addr(Y),
            contract: addr(VAULT),
        };
        let withdraw = Operation::Withdraw {
            proof: addr(Y),
            token: addr(Z),
            contract: addr(POOL),
        };
        let donate = Operation::Stake {
            token: addr(Z),
            contract: addr(POOL),
        };

        let ops = vec![
            op(deposit.clone(), 0, (1, 2)),
            op(donate.clone(), 1, (3, 3)),
            op(withdraw.clone(), 2, (4, 5)),
        ];
        let verdicts = vec![
            verdict(addr(Y), addr(POOL), PriceDirection::Increase, 10, 1),
            verdict(addr(Z), addr(POOL), PriceDirection::Decrease, 10, 1),
        ];
        let findings = match_patterns(&ops, &verdicts, 6, &reg());
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].pattern, PatternId::VII);
        assert_eq!(findings[0].verdicts, vec![0, 1]);
        assert_eq!(findings[0].family, PatternFamily::DepositWithdraw);

        // Different proof token breaks the binding: no VII.
        let mismatched = Operation::Withdraw {
            proof: addr(5),
            token: addr(Z),
            contract: addr(POOL),
        };
        let ops_bad = vec![
            op(deposit.clone(), 0, (1, 2)),
            op(donate.clone(), 1, (3, 3)),
            op(mismatched, 2, (4, 5)),
        ];
        assert!(match_patterns(&ops_bad, &verdicts, 6, &reg()).is_empty());

        // Movement before the deposit → VIII.
        let ops = vec![
            op(donate, 0, (1, 1)),
            op(deposit, 1, (2, 3)),
            op(withdraw, 2, (4, 5)),
        ];
        let verdicts = vec![verdict(addr(Y), addr(POOL), PriceDirection::Increase, 10, 0)];
        let findings = match_patterns(&ops, &verdicts, 6, &reg());
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].pattern, PatternId::VIII);
    }

    #[test]
    fn confidence_floor_filters_verdicts() {
        let ops = vec![
            op(swap(addr(X), addr(Y), addr(POOL)), 0, (1, 2)),
            op(swap(addr(Y), addr(X), addr(POOL)), 1, (3, 4)),
        ];
        let verdicts = vec![verdict(addr(Y), addr(POOL), PriceDirection::Increase, 5, 0)];
        assert!(match_patterns(&ops, &verdicts, 6, &reg()).is_empty());
        assert_eq!(match_patterns(&ops, &verdicts, 5, &reg()).len(), 1);
    }

    #[test]
    fn unanchored_verdicts_cannot_match() {
        let ops = vec![
            op(swap(addr(X), addr(Y), addr(POOL)), 0, (1, 2)),
            op(swap(addr(Y), addr(X), addr(POOL)), 1, (3, 4)),
        ];
        // Right claim, but its invocation holds no operation touching POOL.
        let verdicts = vec![verdict(addr(Y), addr(POOL), PriceDirection::Increase, 10, 5)];
        assert!(match_patterns(&ops, &verdicts, 6, &reg()).is_empty());
    }

    #[test]
    fn swap_token_binding_is_required() {
        // Second swap consumes a different token than the first produced.
        let ops = vec![
            op(swap(addr(X), addr(Y), addr(POOL)), 0, (1, 2)),
            op(swap(addr(Z), addr(X), addr(POOL)), 1, (3, 4)),
        ];
        let verdicts = vec![verdict(addr(Y), addr(POOL), PriceDirection::Increase, 10, 0)];
        assert!(match_patterns(&ops, &verdicts, 6, &reg()).is_empty());
    }

    #[test]
    fn findings_order_by_pattern_then_time() {
        // One op set that yields both a pattern-I and a pattern-III finding,
        // with the III ops earlier in time than the I ops.
        let mut ops = vec![
            op(
                Operation::Deposit {
                    token: addr(X),
                    proof: addr(4),
                    contract: addr(VAULT),
                },
                0,
                (1, 1),
            ),
            op(
                Operation::Stake {
                    token: addr(Z),
                    contract: addr(POOL2),
                },
                1,
                (2, 2),
            ),
            op(
                Operation::Borrow {
                    token: addr(Z),
                    debt: addr(5),
                    contract: addr(POOL2),
                },
                2,
                (3, 3),
            ),
        ];
        ops.push(op(swap(addr(X), addr(Y), addr(POOL)), 3, (4, 5)));
        ops.push(op(swap(addr(Y), addr(X), addr(POOL)), 4, (6, 7)));
        let verdicts = vec![
            verdict(addr(Z), addr(POOL2), PriceDirection::Decrease, 10, 1),
            verdict(addr(Y), addr(POOL), PriceDirection::Increase, 10, 3),
        ];
        let findings = match_patterns(&ops, &verdicts, 6, &reg());
        assert_eq!(findings.len(), 2);
        assert_eq!(findings[0].pattern, PatternId::I);
        assert_eq!(findings[1].pattern, PatternId::III);

        // Determinism: a second run is identical.
        assert_eq!(findings, match_patterns(&ops, &verdicts, 6, &reg()));
    }

    #[test]
    fn adding_unrelated_operations_never_removes_findings() {
        let base_ops = vec![
            op(swap(addr(X), addr(Y), addr(POOL)), 0, (1, 2)),
            op(swap(addr(Y), addr(X), addr(POOL)), 1, (3, 4)),
        ];
        let verdicts = vec![verdict(addr(Y), addr(POOL), PriceDirection::Increase, 10, 0)];
        let baseline = match_patterns(&base_ops, &verdicts, 6, &reg());
        assert_eq!(baseline.len(), 1);

        // Splice in operations over fresh addresses at assorted positions.
        let fresh = |k: u8| addr(0xA0 + k);
        let intruders = vec![
            op(
                Operation::Stake {
                    token: fresh(1),
                    contract: fresh(2),
                },
                7,
                (9, 9),
            ),
            op(
                Operation::Deposit {
                    token: fresh(3),
                    proof: fresh(4),
                    contract: fresh(5),
                },
                8,
                (10, 11),
            ),
            op(swap(fresh(6), fresh(7), fresh(8)), 9, (12, 13)),
            op(
                Operation::Claim {
                    token: fresh(9),
                    contract: fresh(10),
                },
                10,
                (14, 14),
            ),
        ];
        for intruder in intruders {
            let mut ops = base_ops.clone();
            ops.push(intruder);
            let found = match_patterns(&ops, &verdicts, 6, &reg());
            assert!(
                found
                    .iter()
                    .any(|f| f.pattern == PatternId::I && f.operations == vec![0, 1]),
                "finding lost after adding unrelated op"
            );
        }
    }

    proptest::proptest! {
        #[test]
        fn prop_unrelated_operation_preserves_findings(
            kind in 0u8..6,
            a in 0xA0u8..0xD0,
            b in 0xD0u8..0xF0,
            start in 10u32..1000,
            len in 0u32..5,
            invocation in 5usize..50,
        ) {
            let base_ops = vec![
                op(swap(addr(X), addr(Y), addr(POOL)), 0, (1, 2)),
                op(swap(addr(Y), addr(X), addr(POOL)), 1, (3, 4)),
            ];
            let verdicts = vec![verdict(addr(Y), addr(POOL), PriceDirection::Increase, 10, 0)];
            let intruder_kind = match kind {
                0 => swap(addr(a), addr(b), addr(a.wrapping_add(1))),
                1 => Operation::Deposit { token: addr(a), proof: addr(b), contract: addr(a.wrapping_add(1)) },
                2 => Operation::Withdraw { proof: addr(a), token: addr(b), contract: addr(a.wrapping_add(1)) },
                3 => Operation::Borrow { token: addr(a), debt: addr(b), contract: addr(a.wrapping_add(1)) },
                4 => Operation::Stake { token: addr(a), contract: addr(b) },
                _ => Operation::Claim { token: addr(a), contract: addr(b) },
            };
            let mut ops = base_ops.clone();
            ops.push(op(intruder_kind, invocation, (start, start + len)));
            let found = match_patterns(&ops, &verdicts, 6, &reg());
            proptest::prop_assert!(
                found.iter().any(|f| f.pattern == PatternId::I && f.operations == vec![0, 1])
            );
        }
    }

    // --- end-to-end pipeline ---

    fn topic_of(a: Address) -> Word {
        let mut w = [0u8; 32];
        w[12..].copy_from_slice(&a.0);
        Word(w)
    }

    fn xfer_log(token: Address, from: Address, to: Address, amount: u128) -> RawLog {
        let mut data = [0u8; 32];
        data[16..].copy_from_slice(&amount.to_be_bytes());
        RawLog {
            address: token,
            topics: vec![TRANSFER_TOPIC, topic_of(from), topic_of(to)],
            data: data.to_vec(),
        }
    }

    fn frame(caller: Address, callee: Address, depth: u32, logs: Vec<RawLog>) -> CallFrame {
        CallFrame {
            caller,
            callee,
            selector: Selector::default(),
            depth,
            op: CallOp::Call,
            logs,
            children: vec![],
        }
    }

    const E18: u128 = 1_000_000_000_000_000_000;

    /// Round trip through one pool: swap X→Y, then Y→X, with the pool
    /// configured so the analytic engine prices both invocations.
    fn round_trip_input() -> ScanInput {
        let eoa = addr(0x11);
        let proxy = addr(0x22);
        let pool = addr(POOL);
        let mut entry = frame(eoa, proxy, 0, vec![]);
        entry.children = vec![
            frame(
                proxy,
                pool,
                1,
                vec![
                    xfer_log(addr(X), proxy, pool, 100 * E18),
                    xfer_log(addr(Y), pool, proxy, 90 * E18),
                ],
            ),
            frame(
                proxy,
                pool,
                1,
                vec![
                    xfer_log(addr(Y), proxy, pool, 90 * E18),
                    xfer_log(addr(X), pool, proxy, 95 * E18),
                ],
            ),
        ];
        let trace = TransactionTrace {
            tx_hash: Word([0xab; 32]),
            chain_id: 1,
            block_number: 100,
            initiator: eoa,
            entry,
        };
        let mut input = ScanInput::bare(trace);
        input.pools = vec![PoolConfig::Cpmm {
            address: pool,
            tokens: [addr(X), addr(Y)],
            reserves: [
                TokenAmount::from_u128(1000 * E18),
                TokenAmount::from_u128(1000 * E18),
            ],
            fee_bps: 30,
        }];
        input
    }

    #[test]
    fn pipeline_detects_round_trip_manipulation() {
        let report = detect(&round_trip_input(), &DetectConfig::default()).unwrap();
        assert_eq!(report.tx_hash, format!("0x{}", "ab".repeat(32)));
        assert!(report.warnings.is_empty(), "{:?}", report.warnings);
        assert_eq!(report.operations.len(), 2);
        assert!(matches!(report.operations[0].op, Operation::Swap { .. }));
        // Both invocations price both pool tokens.
        assert_eq!(report.verdicts.len(), 4);
        assert_eq!(report.findings.len(), 1);
        let f = &report.findings[0];
        assert_eq!(f.pattern, PatternId::I);
        assert_eq!(f.operations, vec![0, 1]);
        assert_eq!(f.verdicts.len(), 2);
        for &vi in &f.verdicts {
            assert_eq!(report.verdicts[vi].invocation, 0);
        }
    }

    #[test]
    fn pipeline_zero_deadline_yields_partial_report() {
        let cfg = DetectConfig {
            timeout: Duration::ZERO,
            ..DetectConfig::default()
        };
        let report = detect(&round_trip_input(), &cfg).unwrap();
        assert!(report.findings.is_empty());
        assert!(
            report.warnings.iter().any(|w| w.starts_with("TimeoutWarning:")),
            "{:?}",
            report.warnings
        );
    }

    #[test]
    fn pipeline_search_budget_exhaustion_degrades_to_warnings() {
        let cfg = DetectConfig {
            search_budget: 1,
            ..DetectConfig::default()
        };
        let report = detect(&round_trip_input(), &cfg).unwrap();
        // Both invocations blow the one-path budget: no operations, hence no
        // findings, but price verdicts (delta-driven) still come through.
        assert!(report.operations.is_empty());
        assert!(report.findings.is_empty());
        assert_eq!(report.verdicts.len(), 4);
        let budget_warnings: Vec<&String> = report
            .warnings
            .iter()
            .filter(|w| w.starts_with("TimeoutWarning:") && w.contains("swap-cycle search"))
            .collect();
        assert_eq!(budget_warnings.len(), 2);
        assert!(budget_warnings[0].contains("invocation 0"));
    }

    #[test]
    fn report_serializes_with_camel_case_fields() {
        let report = detect(&round_trip_input(), &DetectConfig::default()).unwrap();
        let json = serde_json::to_value(&report).unwrap();
        assert!(json.get("txHash").is_some());
        assert!(json.get("timings").unwrap().get("decodeMs").is_some());
        assert!(json.get("timings").unwrap().get("matchMs").is_some());
        let finding = &json.get("findings").unwrap()[0];
        assert_eq!(finding.get("pattern").unwrap(), "I");
        assert_eq!(finding.get("family").unwrap(), "BuySell");
        assert!(finding.get("invocationIndex").is_some());
        let back: DetectionReport = serde_json::from_value(json).unwrap();
        assert_eq!(back.findings, report.findings);
    }
}
