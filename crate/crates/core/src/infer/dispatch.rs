//! Routing each (invocation, contract) pair to the best available
//! inference backend and merging the verdicts.
//!
//! Priority: a configured pool model beats a verified-source prompt, which
//! beats a constant-product prompt. Verdicts sharing an
//! (invocation, token, contract) key keep only the highest-priority
//! backend's answer. Backend failures degrade to warnings — inference never
//! kills a scan.

use super::{
    analytic_infer, build_prompt_type1, build_prompt_type2, describe_changes,
    extract_price_functions, generate_statements, load_source_bundle, parse_scores, query_backend,
    resolve_verdicts, BackendKind, ChangeDescription, ChangeScope, InferError,
    InferenceBackendConfig, PoolState, PriceChangeVerdict, VerdictBackend, PRICE_KEYWORDS,
};
use crate::amm::PoolConfig;
use crate::graph::UserControlledSet;
use crate::ingest::BalanceDelta;
use crate::primitives::{Address, TokenRegistry};
use crate::recover::{DeFiOperation, Operation};
use num_bigint::BigInt;
use num_traits::Zero;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

/// Everything inference needs from the earlier pipeline stages.
pub struct InferContext<'a> {
    pub operations: &'a [DeFiOperation],
    /// Declared pool models, evolved cumulatively across invocations.
    pub pools: &'a [PoolConfig],
    /// Balance deltas per invocation, indexed by invocation order.
    pub invocation_deltas: &'a [Vec<BalanceDelta>],
    /// Directory of per-contract source bundles, if any.
    pub bundles_dir: Option<&'a Path>,
    pub registry: &'a TokenRegistry,
    pub uc: &'a UserControlledSet,
}

/// Runs every backend the configuration allows and merges their verdicts.
/// Returns the verdicts sorted by (invocation, contract, token) plus any
/// warnings accumulated along the way.
pub fn infer_price_changes(
    ctx: &InferContext,
    cfg: &InferenceBackendConfig,
) -> (Vec<PriceChangeVerdict>, Vec<String>) {
    let mut warnings = Vec::new();
    let mut merged: MergedMap = BTreeMap::new();

    let run_analytic = matches!(cfg.kind, BackendKind::Auto | BackendKind::Analytic);
    let run_type1 = matches!(cfg.kind, BackendKind::Auto | BackendKind::LlmType1);
    let run_type2 = matches!(cfg.kind, BackendKind::Auto | BackendKind::LlmType2);
    let pool_addresses: BTreeSet<Address> = ctx.pools.iter().map(PoolConfig::address).collect();

    if run_analytic {
        for vs in analytic_pass(ctx, &mut warnings) {
            merge_into(&mut merged, vs);
        }
    }
    if run_type1 {
        let exclude = if cfg.kind == BackendKind::Auto {
            pool_addresses.clone()
        } else {
            BTreeSet::new()
        };
        type1_pass(ctx, cfg, &exclude, &mut merged, &mut warnings);
    }
    if run_type2 {
        let mut exclude = if cfg.kind == BackendKind::Auto {
            pool_addresses
        } else {
            BTreeSet::new()
        };
        if cfg.kind == BackendKind::Auto {
            // Contracts already answered by a verified-source prompt.
            exclude.extend(merged.values().filter_map(|v| {
                (v.backend == VerdictBackend::LlmTypeI).then_some(v.contract)
            }));
        }
        type2_pass(ctx, cfg, &exclude, &mut merged, &mut warnings);
    }

    (merged.into_values().collect(), warnings)
}

type MergedMap = BTreeMap<(usize, Address, Address), PriceChangeVerdict>;

/// First writer wins: passes run in priority order, so an analytic verdict
/// on a key shadows any later LLM verdict on the same key.
fn merge_into(merged: &mut MergedMap, vs: Vec<PriceChangeVerdict>) {
    for v in vs {
        merged.entry((v.invocation, v.contract, v.token)).or_insert(v);
    }
}

/// Evolves each configured pool through the per-invocation deltas and
/// compares marginal prices before and after every invocation that touched
/// it. State is cumulative: invocation k sees the reserves left behind by
/// invocations 0..k.
fn analytic_pass(ctx: &InferContext, warnings: &mut Vec<String>) -> Vec<Vec<PriceChangeVerdict>> {
    let mut out = Vec::new();
    for pool_cfg in ctx.pools {
        let mut state = match PoolState::from_config(pool_cfg) {
            Ok(s) => s,
            Err(e) => {
                warnings.push(format!("pool {} ignored: {e}", pool_cfg.address()));
                continue;
            }
        };
        let address = state.address();
        'invocations: for (k, deltas) in ctx.invocation_deltas.iter().enumerate() {
            let mut touched = false;
            let mut next = Vec::with_capacity(state.reserves().len());
            for (i, token) in state.tokens().iter().enumerate() {
                let delta: BigInt = deltas
                    .iter()
                    .filter(|d| d.account == address && d.token == *token)
                    .map(|d| d.delta.clone())
                    .sum();
                if !delta.is_zero() {
                    touched = true;
                }
                match state.reserves()[i].checked_add_signed(&delta) {
                    Ok(r) => next.push(r),
                    Err(_) => {
                        warnings.push(format!(
                            "pool {address} reserve of {token} would go negative in invocation {k}; model frozen"
                        ));
                        break 'invocations;
                    }
                }
            }
            if !touched {
                continue;
            }
            let after = match state.with_reserves(next) {
                Ok(s) => s,
                Err(e) => {
                    warnings.push(format!("pool {address} invocation {k}: {e}"));
                    break;
                }
            };
            match analytic_infer(&state, &after, k) {
                Ok(vs) => out.push(vs),
                Err(e) => {
                    warnings.push(format!("pool {address} invocation {k}: {e}"));
                }
            }
            state = after;
        }
    }
    out
}

/// Token/contract pairs worth asking about in one invocation: every non-UC,
/// non-null account whose balance of some token moved, plus every token
/// whose total supply moved (asked about at the token's own contract).
fn candidate_pairs(
    deltas: &[BalanceDelta],
    uc: &UserControlledSet,
) -> BTreeMap<Address, BTreeSet<Address>> {
    let mut pairs: BTreeMap<Address, BTreeSet<Address>> = BTreeMap::new();
    for d in deltas {
        if d.delta.is_zero() || uc.contains(&d.account) || d.account.is_null() {
            continue;
        }
        pairs.entry(d.account).or_default().insert(d.token);
    }
    let mut supply_seen = BTreeSet::new();
    for d in deltas {
        if let Some(s) = &d.total_supply_delta {
            if !s.is_zero() && supply_seen.insert(d.token) && !uc.contains(&d.token) {
                pairs.entry(d.token).or_default().insert(d.token);
            }
        }
    }
    pairs
}

fn type1_pass(
    ctx: &InferContext,
    cfg: &InferenceBackendConfig,
    exclude: &BTreeSet<Address>,
    merged: &mut MergedMap,
    warnings: &mut Vec<String>,
) {
    let Some(bundles_dir) = ctx.bundles_dir else {
        return;
    };
    let mut endpoint_warned = false;
    for (k, deltas) in ctx.invocation_deltas.iter().enumerate() {
        let changes = describe_changes(deltas, ctx.registry);
        for (contract, tokens) in candidate_pairs(deltas, ctx.uc) {
            if exclude.contains(&contract) {
                continue;
            }
            let bundle = match load_source_bundle(bundles_dir, contract) {
                Ok(b) => b,
                Err(InferError::NoSource(_)) => continue,
                Err(e) => {
                    warnings.push(format!("source bundle for {contract}: {e}"));
                    continue;
                }
            };
            let code = match extract_price_functions(&bundle, PRICE_KEYWORDS) {
                Ok(c) if c.is_empty() => {
                    warnings.push(format!(
                        "verified source for {contract} has no price-relevant functions"
                    ));
                    continue;
                }
                Ok(c) => c,
                Err(InferError::NoSource(_)) => continue,
                Err(e) => {
                    warnings.push(format!("source bundle for {contract}: {e}"));
                    continue;
                }
            };
            if cfg.endpoint.is_none() {
                if !endpoint_warned {
                    warnings.push(
                        "no scoring endpoint configured; verified-source prompts skipped"
                            .to_string(),
                    );
                    endpoint_warned = true;
                }
                continue;
            }
            let tokens: Vec<Address> = tokens.into_iter().collect();
            let statements = generate_statements(&tokens, &[contract], ctx.registry);
            let round = build_prompt_type1(&code, &statements, &changes, &cfg.type1_template)
                .and_then(|prompt| {
                    score_round(cfg, &prompt, &statements, VerdictBackend::LlmTypeI, k)
                });
            match round {
                Ok((vs, ws)) => {
                    warnings.extend(ws);
                    merge_into(merged, vs);
                }
                Err(e) => {
                    warnings.push(format!(
                        "verified-source scoring for {contract} invocation {k} failed: {e}"
                    ));
                }
            }
        }
    }
}

fn type2_pass(
    ctx: &InferContext,
    cfg: &InferenceBackendConfig,
    exclude: &BTreeSet<Address>,
    merged: &mut MergedMap,
    warnings: &mut Vec<String>,
) {
    // Pools named by a swap, grouped by the invocation the swap ran in.
    let mut labeled: BTreeMap<usize, BTreeSet<Address>> = BTreeMap::new();
    for op in ctx.operations {
        if let Operation::Swap { pools, .. } = &op.op {
            labeled.entry(op.invocation).or_default().extend(pools.iter().copied());
        }
    }
    let mut endpoint_warned = false;
    for (k, pools) in labeled {
        let Some(deltas) = ctx.invocation_deltas.get(k) else {
            continue;
        };
        let changes = describe_changes(deltas, ctx.registry);
        for pool in pools {
            if exclude.contains(&pool) {
                continue;
            }
            let tokens: Vec<Address> = deltas
                .iter()
                .filter(|d| d.account == pool && !d.delta.is_zero())
                .map(|d| d.token)
                .collect();
            if tokens.len() != 2 {
                warnings.push(format!(
                    "pool {pool} moved {} tokens in invocation {k}; two-token prompt skipped",
                    tokens.len()
                ));
                continue;
            }
            if cfg.endpoint.is_none() {
                if !endpoint_warned {
                    warnings.push(
                        "no scoring endpoint configured; constant-product prompts skipped"
                            .to_string(),
                    );
                    endpoint_warned = true;
                }
                continue;
            }
            let pool_changes: Vec<ChangeDescription> = changes
                .iter()
                .filter(|c| c.scope == ChangeScope::ContractBalance(pool))
                .cloned()
                .collect();
            let statements = generate_statements(&tokens, &[pool], ctx.registry);
            let round = build_prompt_type2(
                pool,
                &tokens,
                &statements,
                &pool_changes,
                ctx.registry,
                &cfg.type2_template,
            )
            .and_then(|prompt| {
                score_round(cfg, &prompt, &statements, VerdictBackend::LlmTypeII, k)
            });
            match round {
                Ok((vs, ws)) => {
                    warnings.extend(ws);
                    merge_into(merged, vs);
                }
                Err(e) => {
                    warnings.push(format!(
                        "constant-product scoring for {pool} invocation {k} failed: {e}"
                    ));
                }
            }
        }
    }
}

/// Query → parse → resolve for one already-built prompt.
fn score_round(
    cfg: &InferenceBackendConfig,
    prompt: &str,
    statements: &[super::PriceStatement],
    backend: VerdictBackend,
    invocation: usize,
) -> Result<(Vec<PriceChangeVerdict>, Vec<String>), InferError> {
    let response = query_backend(cfg, prompt)?;
    let (scores, warnings) = parse_scores(&response, statements.len())?;
    let verdicts = resolve_verdicts(statements, &scores, backend, invocation)?;
    Ok((verdicts, warnings))
}

#[cfg(test)]
mod tests {
    use super::super::stubserver::{chat_reply, spawn_stub};
    use super::*;
    use crate::primitives::TokenAmount;
    use std::sync::atomic::Ordering;

    fn addr(n: u8) -> Address {
        Address([n; 20])
    }

    fn delta(account: Address, token: Address, v: i64) -> BalanceDelta {
        BalanceDelta {
            account,
            token,
            delta: BigInt::from(v),
            total_supply_delta: None,
        }
    }

    fn cpmm_config(address: Address, x: u128, y: u128) -> PoolConfig {
        PoolConfig::Cpmm {
            address,
            tokens: [addr(1), addr(2)],
            reserves: [TokenAmount::from_u128(x), TokenAmount::from_u128(y)],
            fee_bps: 30,
        }
    }

    fn uc_of(initiator: Address) -> UserControlledSet {
        UserControlledSet::from_accounts([initiator])
    }

    fn base_cfg(kind: BackendKind, endpoint: Option<String>) -> InferenceBackendConfig {
        InferenceBackendConfig {
            kind,
            endpoint,
            api_key: Some("k".into()),
            retry_backoff_ms: 1,
            ..InferenceBackendConfig::default()
        }
    }

    #[test]
    fn analytic_mode_prices_pools_without_touching_the_network() {
        let (url, hits, _handle) = spawn_stub(vec![]);
        let pool = addr(9);
        let pools = vec![cpmm_config(pool, 1000, 1000)];
        let deltas = vec![vec![delta(pool, addr(1), 100), delta(pool, addr(2), -91)]];
        let ctx = InferContext {
            operations: &[],
            pools: &pools,
            invocation_deltas: &deltas,
            bundles_dir: None,
            registry: &TokenRegistry::default(),
            uc: &uc_of(addr(0x11)),
        };
        let (verdicts, warnings) =
            infer_price_changes(&ctx, &base_cfg(BackendKind::Analytic, Some(url)));
        assert!(warnings.is_empty(), "{warnings:?}");
        assert_eq!(verdicts.len(), 2);
        assert!(verdicts
            .iter()
            .all(|v| v.backend == VerdictBackend::Analytic && v.confidence == 10));
        assert_eq!(hits.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn pool_state_is_cumulative_across_invocations() {
        let pool = addr(9);
        let pools = vec![cpmm_config(pool, 1000, 1000)];
        // Invocation 0 shifts the ratio to 4:1; invocation 1 doubles both
        // sides, which leaves every price exactly where it was — but only
        // if the model carried invocation 0's state forward.
        let deltas = vec![
            vec![delta(pool, addr(1), 1000), delta(pool, addr(2), -500)],
            vec![delta(pool, addr(1), 2000), delta(pool, addr(2), 500)],
        ];
        let ctx = InferContext {
            operations: &[],
            pools: &pools,
            invocation_deltas: &deltas,
            bundles_dir: None,
            registry: &TokenRegistry::default(),
            uc: &uc_of(addr(0x11)),
        };
        let (verdicts, warnings) =
            infer_price_changes(&ctx, &base_cfg(BackendKind::Analytic, None));
        assert!(warnings.is_empty(), "{warnings:?}");
        assert_eq!(verdicts.len(), 2);
        assert!(verdicts.iter().all(|v| v.invocation == 0));
    }

    #[test]
    fn reserve_underflow_freezes_the_pool_model_with_a_warning() {
        let pool = addr(9);
        let pools = vec![cpmm_config(pool, 1000, 1000)];
        let deltas = vec![
            vec![delta(pool, addr(2), -5000)],
            vec![delta(pool, addr(1), 100), delta(pool, addr(2), -50)],
        ];
        let ctx = InferContext {
            operations: &[],
            pools: &pools,
            invocation_deltas: &deltas,
            bundles_dir: None,
            registry: &TokenRegistry::default(),
            uc: &uc_of(addr(0x11)),
        };
        let (verdicts, warnings) =
            infer_price_changes(&ctx, &base_cfg(BackendKind::Analytic, None));
        assert!(verdicts.is_empty());
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("negative"), "{warnings:?}");
    }

    fn write_bundle(dir: &Path, contract: Address, verified: bool, code: &str) {
        let bdir = dir.join(contract.to_string());
        std::fs::create_dir_all(&bdir).unwrap();
        std::fs::write(
            bdir.join("metadata.json"),
            format!(r#"{{"verified": {verified}}}"#),
        )
        .unwrap();
        std::fs::write(bdir.join("Price.sol"), code).unwrap();
    }

    #[test]
    fn auto_routes_source_contracts_to_type1_and_labeled_pools_to_type2() {
        let oracle = addr(0x0a);
        let pool = addr(0x0b);
        let bundles = tempfile::tempdir().unwrap();
        write_bundle(
            bundles.path(),
            oracle,
            true,
            "function getPrice() public view returns (uint256) { return 1; }",
        );

        // First reply scores the oracle pair (2 statements), second the
        // pool's two pairs (4 statements).
        let (url, hits, handle) = spawn_stub(vec![
            (200, chat_reply("Statement 1: 9\nStatement 2: 2")),
            (
                200,
                chat_reply("Statement 1: 2\nStatement 2: 9\nStatement 3: 9\nStatement 4: 2"),
            ),
        ]);

        let swap = DeFiOperation {
            op: Operation::Swap {
                token_in: addr(1),
                token_out: addr(2),
                pools: vec![pool],
            },
            invocation: 0,
            edge_refs: vec![1, 2],
            span: (1, 2),
        };
        let deltas = vec![vec![
            delta(oracle, addr(1), 500),
            delta(pool, addr(1), 100),
            delta(pool, addr(2), -90),
        ]];
        let ctx = InferContext {
            operations: &[swap],
            pools: &[],
            invocation_deltas: &deltas,
            bundles_dir: Some(bundles.path()),
            registry: &TokenRegistry::default(),
            uc: &uc_of(addr(0x11)),
        };
        let (verdicts, warnings) =
            infer_price_changes(&ctx, &base_cfg(BackendKind::Auto, Some(url)));
        assert!(warnings.is_empty(), "{warnings:?}");
        assert_eq!(hits.load(Ordering::SeqCst), 2);

        let type1: Vec<_> = verdicts
            .iter()
            .filter(|v| v.backend == VerdictBackend::LlmTypeI)
            .collect();
        let type2: Vec<_> = verdicts
            .iter()
            .filter(|v| v.backend == VerdictBackend::LlmTypeII)
            .collect();
        assert_eq!(type1.len(), 1);
        assert_eq!(type1[0].contract, oracle);
        assert_eq!(type1[0].direction, super::super::PriceDirection::Increase);
        assert_eq!(type2.len(), 2);
        assert!(type2.iter().all(|v| v.contract == pool));

        let bodies = handle.join().unwrap();
        assert!(bodies[0].contains("getPrice"));
        assert!(bodies[1].contains("exactly two tokens"));
    }

    #[test]
    fn configured_pools_are_not_prompted_in_auto_mode() {
        let pool = addr(9);
        let bundles = tempfile::tempdir().unwrap();
        write_bundle(bundles.path(), pool, true, "function getPrice() public {}");
        let (url, hits, _handle) = spawn_stub(vec![]);

        let swap = DeFiOperation {
            op: Operation::Swap {
                token_in: addr(1),
                token_out: addr(2),
                pools: vec![pool],
            },
            invocation: 0,
            edge_refs: vec![1, 2],
            span: (1, 2),
        };
        let pools = vec![cpmm_config(pool, 1000, 1000)];
        let deltas = vec![vec![delta(pool, addr(1), 100), delta(pool, addr(2), -91)]];
        let ctx = InferContext {
            operations: &[swap],
            pools: &pools,
            invocation_deltas: &deltas,
            bundles_dir: Some(bundles.path()),
            registry: &TokenRegistry::default(),
            uc: &uc_of(addr(0x11)),
        };
        let (verdicts, warnings) =
            infer_price_changes(&ctx, &base_cfg(BackendKind::Auto, Some(url)));
        assert!(warnings.is_empty(), "{warnings:?}");
        assert_eq!(hits.load(Ordering::SeqCst), 0);
        assert_eq!(verdicts.len(), 2);
        assert!(verdicts.iter().all(|v| v.backend == VerdictBackend::Analytic));
    }

    #[test]
    fn backend_failure_becomes_a_warning_not_an_error() {
        let oracle = addr(0x0a);
        let bundles = tempfile::tempdir().unwrap();
        write_bundle(bundles.path(), oracle, true, "function rate() public {}");
        let (url, _, _handle) = spawn_stub(vec![
            (500, "{}".into()),
            (500, "{}".into()),
            (500, "{}".into()),
        ]);
        let deltas = vec![vec![delta(oracle, addr(1), 500)]];
        let ctx = InferContext {
            operations: &[],
            pools: &[],
            invocation_deltas: &deltas,
            bundles_dir: Some(bundles.path()),
            registry: &TokenRegistry::default(),
            uc: &uc_of(addr(0x11)),
        };
        let (verdicts, warnings) =
            infer_price_changes(&ctx, &base_cfg(BackendKind::LlmType1, Some(url)));
        assert!(verdicts.is_empty());
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("failed"), "{warnings:?}");
    }

    #[test]
    fn uc_and_null_accounts_are_never_candidates() {
        let initiator = addr(0x11);
        let deltas = vec![vec![
            delta(initiator, addr(1), 500),
            delta(Address::ZERO, addr(1), 5),
        ]];
        let pairs = candidate_pairs(&deltas[0], &uc_of(initiator));
        assert!(pairs.is_empty());
    }

    #[test]
    fn unverified_bundles_are_skipped_silently() {
        let oracle = addr(0x0a);
        let bundles = tempfile::tempdir().unwrap();
        write_bundle(bundles.path(), oracle, false, "function rate() public {}");
        let (url, hits, _handle) = spawn_stub(vec![]);
        let deltas = vec![vec![delta(oracle, addr(1), 500)]];
        let ctx = InferContext {
            operations: &[],
            pools: &[],
            invocation_deltas: &deltas,
            bundles_dir: Some(bundles.path()),
            registry: &TokenRegistry::default(),
            uc: &uc_of(addr(0x11)),
        };
        let (verdicts, warnings) =
            infer_price_changes(&ctx, &base_cfg(BackendKind::LlmType1, Some(url)));
        assert!(verdicts.is_empty());
        assert!(warnings.is_empty(), "{warnings:?}");
        assert_eq!(hits.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn non_two_token_pool_movement_warns_and_skips() {
        let pool = addr(0x0b);
        let (url, hits, _handle) = spawn_stub(vec![]);
        let swap = DeFiOperation {
            op: Operation::Swap {
                token_in: addr(1),
                token_out: addr(2),
                pools: vec![pool],
            },
            invocation: 0,
            edge_refs: vec![1, 2],
            span: (1, 2),
        };
        // Three tokens moved at the pool: not a two-token story.
        let deltas = vec![vec![
            delta(pool, addr(1), 100),
            delta(pool, addr(2), -90),
            delta(pool, addr(3), 7),
        ]];
        let ctx = InferContext {
            operations: &[swap],
            pools: &[],
            invocation_deltas: &deltas,
            bundles_dir: None,
            registry: &TokenRegistry::default(),
            uc: &uc_of(addr(0x11)),
        };
        let (verdicts, warnings) =
            infer_price_changes(&ctx, &base_cfg(BackendKind::LlmType2, Some(url)));
        assert!(verdicts.is_empty());
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("moved 3 tokens"), "{warnings:?}");
        assert_eq!(hits.load(Ordering::SeqCst), 0);
    }
}
