//! Regenerates the fixture corpus under `fixtures/`: eight single-pattern
//! attack traces, eight benign traces, one modeled real-world incident, the
//! incident oracle's source bundle, and the frozen verified-source scoring
//! prompt derived from it.
//!
//! Run from anywhere in the workspace:
//!
//! ```text
//! cargo run -p pricescope-cli --example regen_fixtures
//! ```
//!
//! Every file is written deterministically from the constants below, so the
//! corpus can always be rebuilt from scratch and diffed.

use std::fs;
use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use pricescope_core::amm::PoolConfig;
use pricescope_core::infer::{
    build_prompt_type1, describe_changes, extract_price_functions, generate_statements,
    load_source_bundle, InferenceBackendConfig, PRICE_KEYWORDS,
};
use pricescope_core::ingest::{
    save_trace, BalanceDelta, CallFrame, CallOp, RawLog, ScanInput, TransactionTrace,
    TRANSFER_TOPIC,
};
use pricescope_core::primitives::{Address, Selector, Token, TokenAmount, Word};

const E18: u128 = 1_000_000_000_000_000_000;

// ---------------------------------------------------------------------------
// Trace construction helpers
// ---------------------------------------------------------------------------

fn addr(n: u8) -> Address {
    Address([n; 20])
}

fn hex_addr(s: &str) -> Address {
    s.parse().expect("valid address literal")
}

fn topic_of(a: Address) -> Word {
    let mut w = [0u8; 32];
    w[12..].copy_from_slice(&a.0);
    Word(w)
}

fn amount_word(amount: u128) -> Vec<u8> {
    let mut data = [0u8; 32];
    data[16..].copy_from_slice(&amount.to_be_bytes());
    data.to_vec()
}

/// Plain ERC-20 transfer event.
fn xfer(token: Address, from: Address, to: Address, amount: u128) -> RawLog {
    RawLog {
        address: token,
        topics: vec![TRANSFER_TOPIC, topic_of(from), topic_of(to)],
        data: amount_word(amount),
    }
}

/// Mint: transfer from the null address.
fn mint(token: Address, to: Address, amount: u128) -> RawLog {
    xfer(token, Address::ZERO, to, amount)
}

/// Burn: transfer to the null address.
fn burn(token: Address, from: Address, amount: u128) -> RawLog {
    xfer(token, from, Address::ZERO, amount)
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

fn tok(address: Address, symbol: &str, decimals: Option<u8>) -> Token {
    Token {
        address,
        symbol: symbol.to_string(),
        decimals,
    }
}

fn cpmm(address: Address, tokens: [Address; 2], reserves: [u128; 2]) -> PoolConfig {
    PoolConfig::Cpmm {
        address,
        tokens,
        reserves: [
            TokenAmount::from_u128(reserves[0]),
            TokenAmount::from_u128(reserves[1]),
        ],
        fee_bps: 30,
    }
}

fn build_input(
    tx_byte: u8,
    block_number: u64,
    initiator: Address,
    entry: CallFrame,
    tokens: Vec<Token>,
    pools: Vec<PoolConfig>,
) -> ScanInput {
    let trace = TransactionTrace {
        tx_hash: Word([tx_byte; 32]),
        chain_id: 1,
        block_number,
        initiator,
        entry,
    };
    let mut input = ScanInput::bare(trace);
    input.tokens = pricescope_core::primitives::TokenRegistry::new(tokens.iter().cloned());
    input.token_list = tokens;
    input.pools = pools;
    input
}

// ---------------------------------------------------------------------------
// Shared cast for the synthetic attack and benign traces
// ---------------------------------------------------------------------------

const EOA: u8 = 0x11; // externally owned initiator
const ATK: u8 = 0x22; // attacker-deployed proxy, entry callee

const TK_X: u8 = 0x01;
const TK_Y: u8 = 0x02;
const TK_Z: u8 = 0x03;
const TK_W: u8 = 0x04;
const TK_L: u8 = 0x05; // receipt token minted by the vault
const TK_D: u8 = 0x06; // debt marker minted by the lender
const TK_M1: u8 = 0x07; // multi-hop intermediates
const TK_M2: u8 = 0x08;

const POOL_XY: u8 = 0x09;
const POOL_BUY: u8 = 0x0a;
const POOL_SELL: u8 = 0x0b;
const VAULT: u8 = 0x0c;
const LENDER: u8 = 0x0d;
const FARM: u8 = 0x0e;
const REWARDS: u8 = 0x0f;
const LP_MARKET: u8 = 0x10;
const HOP_A: u8 = 0x31;
const HOP_B: u8 = 0x32;
const HOP_C: u8 = 0x33;
const SINK: u8 = 0x77;

fn labels(entries: &[(u8, &str, Option<u8>)]) -> Vec<Token> {
    entries
        .iter()
        .map(|(n, sym, dec)| tok(addr(*n), sym, *dec))
        .collect()
}

fn entry_with(children: Vec<CallFrame>) -> CallFrame {
    let mut entry = frame(addr(EOA), addr(ATK), 0, vec![]);
    entry.children = children;
    entry
}

// ---------------------------------------------------------------------------
// Attack traces: one per pattern, each yielding exactly one finding
// ---------------------------------------------------------------------------

/// Buy X->Y, then sell Y back: the buy itself moves the price the sell
/// cashes in on.
fn attack_pattern_i() -> ScanInput {
    let entry = entry_with(vec![
        frame(
            addr(ATK),
            addr(POOL_XY),
            1,
            vec![
                xfer(addr(TK_X), addr(ATK), addr(POOL_XY), 100 * E18),
                xfer(addr(TK_Y), addr(POOL_XY), addr(ATK), 90 * E18),
            ],
        ),
        frame(
            addr(ATK),
            addr(POOL_XY),
            1,
            vec![
                xfer(addr(TK_Y), addr(ATK), addr(POOL_XY), 90 * E18),
                xfer(addr(TK_X), addr(POOL_XY), addr(ATK), 95 * E18),
            ],
        ),
    ]);
    build_input(
        0xa1,
        18_000_001,
        addr(EOA),
        entry,
        labels(&[
            (TK_X, "TKX", Some(18)),
            (TK_Y, "TKY", Some(18)),
            (POOL_XY, "pool-xy", None),
        ]),
        vec![cpmm(addr(POOL_XY), [addr(TK_X), addr(TK_Y)], [1000 * E18, 1000 * E18])],
    )
}

/// Donation into the sell-side pool first, then buy X->Y and sell Y->Z at
/// the inflated quote.
fn attack_pattern_ii() -> ScanInput {
    let entry = entry_with(vec![
        frame(
            addr(ATK),
            addr(POOL_SELL),
            1,
            vec![xfer(addr(TK_Z), addr(ATK), addr(POOL_SELL), 200 * E18)],
        ),
        frame(
            addr(ATK),
            addr(POOL_BUY),
            1,
            vec![
                xfer(addr(TK_X), addr(ATK), addr(POOL_BUY), 100 * E18),
                xfer(addr(TK_Y), addr(POOL_BUY), addr(ATK), 90 * E18),
            ],
        ),
        frame(
            addr(ATK),
            addr(POOL_SELL),
            1,
            vec![
                xfer(addr(TK_Y), addr(ATK), addr(POOL_SELL), 90 * E18),
                xfer(addr(TK_Z), addr(POOL_SELL), addr(ATK), 110 * E18),
            ],
        ),
    ]);
    build_input(
        0xa2,
        18_000_002,
        addr(EOA),
        entry,
        labels(&[
            (TK_X, "TKX", Some(18)),
            (TK_Y, "TKY", Some(18)),
            (TK_Z, "TKZ", Some(18)),
            (POOL_BUY, "pool-buy", None),
            (POOL_SELL, "pool-sell", None),
        ]),
        vec![
            cpmm(addr(POOL_BUY), [addr(TK_X), addr(TK_Y)], [1000 * E18, 1000 * E18]),
            cpmm(addr(POOL_SELL), [addr(TK_Y), addr(TK_Z)], [1000 * E18, 1000 * E18]),
        ],
    )
}

fn deposit_withdraw_cast() -> Vec<Token> {
    labels(&[
        (TK_X, "TKX", Some(18)),
        (TK_Z, "TKZ", Some(18)),
        (TK_L, "LPT", Some(18)),
        (TK_D, "DBT", Some(18)),
        (VAULT, "vault", None),
        (LENDER, "lend-pool", None),
    ])
}

fn deposit_frame() -> CallFrame {
    frame(
        addr(ATK),
        addr(VAULT),
        1,
        vec![
            xfer(addr(TK_X), addr(ATK), addr(VAULT), 500 * E18),
            mint(addr(TK_L), addr(ATK), 500 * E18),
        ],
    )
}

fn lender_donation_frame() -> CallFrame {
    frame(
        addr(ATK),
        addr(LENDER),
        1,
        vec![xfer(addr(TK_Z), addr(ATK), addr(LENDER), 300 * E18)],
    )
}

fn borrow_frame() -> CallFrame {
    frame(
        addr(ATK),
        addr(LENDER),
        1,
        vec![
            xfer(addr(TK_Z), addr(LENDER), addr(ATK), 200 * E18),
            mint(addr(TK_D), addr(ATK), 200 * E18),
        ],
    )
}

fn lender_pool() -> PoolConfig {
    cpmm(addr(LENDER), [addr(TK_X), addr(TK_Z)], [1000 * E18, 1000 * E18])
}

/// Deposit collateral, inflate it at the lender's price venue, then borrow.
fn attack_pattern_iii() -> ScanInput {
    let entry = entry_with(vec![deposit_frame(), lender_donation_frame(), borrow_frame()]);
    build_input(
        0xa3,
        18_000_003,
        addr(EOA),
        entry,
        deposit_withdraw_cast(),
        vec![lender_pool()],
    )
}

/// Same parts as pattern III with the price push moved in front of the
/// deposit.
fn attack_pattern_iv() -> ScanInput {
    let entry = entry_with(vec![lender_donation_frame(), deposit_frame(), borrow_frame()]);
    build_input(
        0xa4,
        18_000_004,
        addr(EOA),
        entry,
        deposit_withdraw_cast(),
        vec![lender_pool()],
    )
}

fn stake_claim_cast() -> Vec<Token> {
    labels(&[
        (TK_X, "TKX", Some(18)),
        (TK_Y, "TKY", Some(18)),
        (TK_W, "TKW", Some(18)),
        (FARM, "farm", None),
        (REWARDS, "rewards", None),
    ])
}

fn stake_frame() -> CallFrame {
    frame(
        addr(ATK),
        addr(FARM),
        1,
        vec![xfer(addr(TK_X), addr(ATK), addr(FARM), 400 * E18)],
    )
}

fn rewards_donation_frame() -> CallFrame {
    frame(
        addr(ATK),
        addr(REWARDS),
        1,
        vec![xfer(addr(TK_Y), addr(ATK), addr(REWARDS), 250 * E18)],
    )
}

fn claim_frame() -> CallFrame {
    frame(
        addr(ATK),
        addr(REWARDS),
        1,
        vec![xfer(addr(TK_Y), addr(REWARDS), addr(ATK), 80 * E18)],
    )
}

fn rewards_pool() -> PoolConfig {
    cpmm(addr(REWARDS), [addr(TK_Y), addr(TK_W)], [1000 * E18, 1000 * E18])
}

/// Stake, depress the reward token's quote, then claim.
fn attack_pattern_v() -> ScanInput {
    let entry = entry_with(vec![stake_frame(), rewards_donation_frame(), claim_frame()]);
    build_input(
        0xa5,
        18_000_005,
        addr(EOA),
        entry,
        stake_claim_cast(),
        vec![rewards_pool()],
    )
}

/// Same parts as pattern V with the price push moved in front of the stake.
fn attack_pattern_vi() -> ScanInput {
    let entry = entry_with(vec![rewards_donation_frame(), stake_frame(), claim_frame()]);
    build_input(
        0xa6,
        18_000_006,
        addr(EOA),
        entry,
        stake_claim_cast(),
        vec![rewards_pool()],
    )
}

fn lp_market_cast() -> Vec<Token> {
    labels(&[
        (TK_X, "TKX", Some(18)),
        (TK_Z, "TKZ", Some(18)),
        (TK_L, "LPT", Some(18)),
        (VAULT, "vault", None),
        (LP_MARKET, "lp-market", None),
    ])
}

fn lp_donation_frame() -> CallFrame {
    frame(
        addr(ATK),
        addr(LP_MARKET),
        1,
        vec![xfer(addr(TK_Z), addr(ATK), addr(LP_MARKET), 300 * E18)],
    )
}

fn redeem_frame() -> CallFrame {
    frame(
        addr(ATK),
        addr(LP_MARKET),
        1,
        vec![
            burn(addr(TK_L), addr(ATK), 500 * E18),
            xfer(addr(TK_Z), addr(LP_MARKET), addr(ATK), 350 * E18),
        ],
    )
}

fn lp_market_pool() -> PoolConfig {
    cpmm(addr(LP_MARKET), [addr(TK_L), addr(TK_Z)], [1000 * E18, 1000 * E18])
}

/// Deposit for a receipt token, inflate the receipt token's market, then
/// redeem it there.
fn attack_pattern_vii() -> ScanInput {
    let entry = entry_with(vec![deposit_frame(), lp_donation_frame(), redeem_frame()]);
    build_input(
        0xa7,
        18_000_007,
        addr(EOA),
        entry,
        lp_market_cast(),
        vec![lp_market_pool()],
    )
}

/// Same parts as pattern VII with the price push moved in front of the
/// deposit.
fn attack_pattern_viii() -> ScanInput {
    let entry = entry_with(vec![lp_donation_frame(), deposit_frame(), redeem_frame()]);
    build_input(
        0xa8,
        18_000_008,
        addr(EOA),
        entry,
        lp_market_cast(),
        vec![lp_market_pool()],
    )
}

// ---------------------------------------------------------------------------
// Benign traces: ordinary single-intent transactions, zero findings
// ---------------------------------------------------------------------------

fn benign_single_swap() -> ScanInput {
    let entry = entry_with(vec![frame(
        addr(ATK),
        addr(POOL_XY),
        1,
        vec![
            xfer(addr(TK_X), addr(ATK), addr(POOL_XY), 100 * E18),
            xfer(addr(TK_Y), addr(POOL_XY), addr(ATK), 90 * E18),
        ],
    )]);
    build_input(
        0xb1,
        18_100_001,
        addr(EOA),
        entry,
        labels(&[
            (TK_X, "TKX", Some(18)),
            (TK_Y, "TKY", Some(18)),
            (POOL_XY, "pool-xy", None),
        ]),
        vec![cpmm(addr(POOL_XY), [addr(TK_X), addr(TK_Y)], [1000 * E18, 1000 * E18])],
    )
}

/// One routed swap across three venues; the scan must read it as a single
/// operation spanning all three.
fn benign_multi_hop_swap() -> ScanInput {
    let entry = entry_with(vec![frame(
        addr(ATK),
        addr(HOP_A),
        1,
        vec![
            xfer(addr(TK_X), addr(ATK), addr(HOP_A), 100 * E18),
            xfer(addr(TK_M1), addr(HOP_A), addr(HOP_B), 99 * E18),
            xfer(addr(TK_M2), addr(HOP_B), addr(HOP_C), 98 * E18),
            xfer(addr(TK_Y), addr(HOP_C), addr(ATK), 97 * E18),
        ],
    )]);
    build_input(
        0xb2,
        18_100_002,
        addr(EOA),
        entry,
        labels(&[
            (TK_X, "TKX", Some(18)),
            (TK_Y, "TKY", Some(18)),
            (TK_M1, "MID1", Some(18)),
            (TK_M2, "MID2", Some(18)),
            (HOP_A, "hop-a", None),
            (HOP_B, "hop-b", None),
            (HOP_C, "hop-c", None),
        ]),
        vec![],
    )
}

fn benign_deposit_only() -> ScanInput {
    let entry = entry_with(vec![deposit_frame()]);
    build_input(
        0xb3,
        18_100_003,
        addr(EOA),
        entry,
        labels(&[
            (TK_X, "TKX", Some(18)),
            (TK_L, "LPT", Some(18)),
            (VAULT, "vault", None),
        ]),
        vec![],
    )
}

fn benign_withdraw_only() -> ScanInput {
    let entry = entry_with(vec![frame(
        addr(ATK),
        addr(VAULT),
        1,
        vec![
            burn(addr(TK_L), addr(ATK), 500 * E18),
            xfer(addr(TK_X), addr(VAULT), addr(ATK), 500 * E18),
        ],
    )]);
    build_input(
        0xb4,
        18_100_004,
        addr(EOA),
        entry,
        labels(&[
            (TK_X, "TKX", Some(18)),
            (TK_L, "LPT", Some(18)),
            (VAULT, "vault", None),
        ]),
        vec![],
    )
}

/// Deposit and a fair same-size redemption at an unpriced vault.
fn benign_deposit_withdraw() -> ScanInput {
    let entry = entry_with(vec![
        deposit_frame(),
        frame(
            addr(ATK),
            addr(VAULT),
            1,
            vec![
                burn(addr(TK_L), addr(ATK), 500 * E18),
                xfer(addr(TK_X), addr(VAULT), addr(ATK), 500 * E18),
            ],
        ),
    ]);
    build_input(
        0xb5,
        18_100_005,
        addr(EOA),
        entry,
        labels(&[
            (TK_X, "TKX", Some(18)),
            (TK_L, "LPT", Some(18)),
            (VAULT, "vault", None),
        ]),
        vec![],
    )
}

fn benign_stake_only() -> ScanInput {
    let entry = entry_with(vec![stake_frame()]);
    build_input(
        0xb6,
        18_100_006,
        addr(EOA),
        entry,
        labels(&[(TK_X, "TKX", Some(18)), (FARM, "farm", None)]),
        vec![],
    )
}

fn benign_claim_only() -> ScanInput {
    let entry = entry_with(vec![claim_frame()]);
    build_input(
        0xb7,
        18_100_007,
        addr(EOA),
        entry,
        labels(&[(TK_Y, "TKY", Some(18)), (REWARDS, "rewards", None)]),
        vec![],
    )
}

fn benign_transfer_out() -> ScanInput {
    let entry = entry_with(vec![frame(
        addr(ATK),
        addr(SINK),
        1,
        vec![xfer(addr(TK_X), addr(ATK), addr(SINK), 150 * E18)],
    )]);
    build_input(
        0xb8,
        18_100_008,
        addr(EOA),
        entry,
        labels(&[(TK_X, "TKX", Some(18))]),
        vec![],
    )
}

// ---------------------------------------------------------------------------
// Modeled incident: the June 2024 sUSDe lending-market drain
// ---------------------------------------------------------------------------
//
// A simplified reconstruction, not a verbatim chain record: token addresses
// are the real mainnet ones, while the attacker, market, and pool addresses
// are synthetic and the amounts are rounded. The shape is faithful: deposit
// collateral, push sUSDe's quoted price down through its pricing pools,
// then borrow sUSDe against the collateral at the skewed quote.

const SUSDE: &str = "0x9d39a5de30e57443bff2a8307a4256c8797a3497";
const USDE: &str = "0x4c9edd5852cd905f086c759e8383e09bff1e68b3";
const WETH: &str = "0xc02aaa39b223fe8d0a0e5c4f27ead9083c756cc2";
const FRAX: &str = "0x853d955acef822db058eb8505911ed77f175b99e";
const USDC: &str = "0xa0b86991c6218b36c1d19d4a2e9eb0ce3606eb48";
const DAI: &str = "0x6b175474e89094c44da98b954eedeac495271d0f";
const CRVUSD: &str = "0xf939e0a03fb07f59a73314e73794be0e57ac1b4e";
const GHO: &str = "0x40d16fc0246ad3160ccc09b8d0d3a2cd28ae6c2f";

const UWU_EOA: &str = "0xe0a0000000000000000000000000000000000001";
const UWU_ATK: &str = "0xbadc0de000000000000000000000000000000001";
const UWU_MARKET: &str = "0xaaaa000000000000000000000000000000000001";
const UWU_RECEIPT: &str = "0xaaaa0000000000000000000000000000000000e1";
const UWU_DEBT: &str = "0xaaaa0000000000000000000000000000000000d1";
const CURVE_ROUTER: &str = "0xcccc0000000000000000000000000000000000aa";
const CURVE_FRAX: &str = "0xcccc000000000000000000000000000000000001";
const CURVE_USDC: &str = "0xcccc000000000000000000000000000000000002";
const CURVE_DAI: &str = "0xcccc000000000000000000000000000000000003";
const CURVE_CRVUSD: &str = "0xcccc000000000000000000000000000000000004";
const CURVE_GHO: &str = "0xcccc000000000000000000000000000000000005";

const UWU_TX: &str = "0x1dea1eaf00000000000000000000000000000000000000000000000020240610";

fn uwulend_tokens() -> Vec<Token> {
    vec![
        tok(hex_addr(SUSDE), "sUSDe", Some(18)),
        tok(hex_addr(USDE), "USDe", Some(18)),
        tok(hex_addr(WETH), "WETH", Some(18)),
        tok(hex_addr(FRAX), "FRAX", Some(18)),
        tok(hex_addr(USDC), "USDC", Some(6)),
        tok(hex_addr(DAI), "DAI", Some(18)),
        tok(hex_addr(CRVUSD), "crvUSD", Some(18)),
        tok(hex_addr(GHO), "GHO", Some(18)),
        tok(hex_addr(UWU_RECEIPT), "uWETH", Some(18)),
        tok(hex_addr(UWU_DEBT), "dSUSDe", Some(18)),
        tok(hex_addr(UWU_MARKET), "uwu-susde-market", None),
        tok(hex_addr(CURVE_ROUTER), "curve-router", None),
        tok(hex_addr(CURVE_FRAX), "curve-usde-frax", None),
        tok(hex_addr(CURVE_USDC), "curve-usde-usdc", None),
        tok(hex_addr(CURVE_DAI), "curve-usde-dai", None),
        tok(hex_addr(CURVE_CRVUSD), "curve-usde-crvusd", None),
        tok(hex_addr(CURVE_GHO), "curve-gho-usde", None),
    ]
}

fn uwulend() -> ScanInput {
    let eoa = hex_addr(UWU_EOA);
    let atk = hex_addr(UWU_ATK);
    let market = hex_addr(UWU_MARKET);
    let router = hex_addr(CURVE_ROUTER);
    let susde = hex_addr(SUSDE);
    let usde = hex_addr(USDE);

    let swap_leg = |pool: &str, out_token: &str, usde_in: u128, out: u128| {
        frame(
            router,
            hex_addr(pool),
            2,
            vec![
                xfer(usde, atk, hex_addr(pool), usde_in),
                xfer(hex_addr(out_token), hex_addr(pool), atk, out),
            ],
        )
    };
    let mut router_frame = frame(atk, router, 1, vec![]);
    router_frame.children = vec![
        swap_leg(CURVE_FRAX, FRAX, 8_000_000 * E18, 7_980_000 * E18),
        swap_leg(CURVE_USDC, USDC, 9_000_000 * E18, 8_970_000 * 1_000_000),
        swap_leg(CURVE_DAI, DAI, 10_000_000 * E18, 9_960_000 * E18),
        swap_leg(CURVE_CRVUSD, CRVUSD, 11_000_000 * E18, 10_940_000 * E18),
        swap_leg(CURVE_GHO, GHO, 13_000_000 * E18, 12_920_000 * E18),
    ];

    let mut entry = frame(eoa, atk, 0, vec![]);
    entry.children = vec![
        // Collateral in: WETH deposited at the market, receipt minted back.
        frame(
            atk,
            market,
            1,
            vec![
                xfer(hex_addr(WETH), atk, market, 20_000 * E18),
                mint(hex_addr(UWU_RECEIPT), atk, 20_000 * E18),
            ],
        ),
        // One routed leg dumping USDe through the five pricing pools.
        router_frame,
        // The donation that skews the market's sUSDe quote.
        frame(atk, market, 1, vec![xfer(susde, atk, market, 40_000 * E18)]),
        // Borrow sUSDe against the WETH at the skewed quote.
        frame(
            atk,
            market,
            1,
            vec![
                xfer(susde, market, atk, 30_000 * E18),
                mint(hex_addr(UWU_DEBT), atk, 30_000 * E18),
            ],
        ),
    ];

    let trace = TransactionTrace {
        tx_hash: UWU_TX.parse().expect("valid tx hash literal"),
        chain_id: 1,
        block_number: 20_046_000,
        initiator: eoa,
        entry,
    };
    let tokens = uwulend_tokens();
    let mut input = ScanInput::bare(trace);
    input.tokens = pricescope_core::primitives::TokenRegistry::new(tokens.iter().cloned());
    input.token_list = tokens;
    input.pools = vec![cpmm(market, [susde, usde], [500_000 * E18, 500_000 * E18])];
    input
}

// ---------------------------------------------------------------------------
// The incident market's source bundle and the frozen scoring prompt
// ---------------------------------------------------------------------------

const ORACLE_SOL: &str = r#"// Simplified reconstruction of the fallback feed that quoted sUSDe for
// the lending market in this bundle. The quote is a median over live pool
// ratios, so a large enough balance push against one pool moves collateral
// and debt valuations inside a single transaction.

interface ICurveStableSwap {
    function price_oracle() external view returns (uint256);
}

contract SusdeFallbackOracle {
    ICurveStableSwap[5] public pools;
    address public susde;
    SusdeFallbackOracle public baseOracle;

    function getAssetPrice(address asset) external view returns (uint256) {
        if (asset == susde) {
            return _susdePriceMedian();
        }
        return baseOracle.getAssetPrice(asset);
    }

    function _susdePriceMedian() internal view returns (uint256) {
        uint256[5] memory quotes;
        for (uint256 i = 0; i < 5; i++) {
            quotes[i] = pools[i].price_oracle();
        }
        _sort(quotes);
        return quotes[2];
    }

    function _sort(uint256[5] memory xs) internal pure {
        for (uint256 i = 1; i < 5; i++) {
            uint256 key = xs[i];
            uint256 j = i;
            while (j > 0 && xs[j - 1] > key) {
                xs[j] = xs[j - 1];
                j--;
            }
            xs[j] = key;
        }
    }
}
"#;

fn write_bundle(bundles_dir: &Path) {
    let dir = bundles_dir.join(hex_addr(UWU_MARKET).to_string());
    fs::create_dir_all(&dir).expect("create bundle dir");
    fs::write(dir.join("metadata.json"), "{\"verified\": true}\n").expect("write metadata");
    fs::write(dir.join("SusdeFallbackOracle.sol"), ORACLE_SOL).expect("write oracle source");
}

fn delta(account: Address, token: Address, value: i128) -> BalanceDelta {
    BalanceDelta {
        account,
        token,
        delta: BigInt::from(value),
        total_supply_delta: None,
    }
}

/// The balance movements the frozen prompt describes: the donation at the
/// market plus two of the routed pool legs, with one zero row that must not
/// produce a line.
fn golden_deltas() -> Vec<BalanceDelta> {
    let market = hex_addr(UWU_MARKET);
    let e18 = E18 as i128;
    vec![
        delta(market, hex_addr(SUSDE), 40_000 * e18),
        delta(market, hex_addr(USDE), 0),
        delta(hex_addr(CURVE_FRAX), hex_addr(USDE), 8_000_000 * e18),
        delta(hex_addr(CURVE_FRAX), hex_addr(FRAX), -7_980_000 * e18),
        delta(hex_addr(CURVE_USDC), hex_addr(USDE), 9_000_000 * e18),
        delta(hex_addr(CURVE_USDC), hex_addr(USDC), -8_970_000 * 1_000_000),
    ]
}

fn write_golden_prompt(root: &Path, input: &ScanInput) {
    let bundle = load_source_bundle(&root.join("fixtures/bundles"), hex_addr(UWU_MARKET))
        .expect("incident bundle just written");
    let code = extract_price_functions(&bundle, PRICE_KEYWORDS).expect("extract oracle code");
    let statements = generate_statements(&[hex_addr(SUSDE)], &[hex_addr(UWU_MARKET)], &input.tokens);
    let changes = describe_changes(&golden_deltas(), &input.tokens);
    let prompt = build_prompt_type1(
        &code,
        &statements,
        &changes,
        &InferenceBackendConfig::default().type1_template,
    )
    .expect("assemble frozen prompt");
    let path = root.join("fixtures/golden/uwulend_type1_prompt.txt");
    fs::write(&path, prompt).expect("write frozen prompt");
    println!("wrote {}", path.display());
}

// ---------------------------------------------------------------------------

fn main() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .expect("workspace root");

    let traces: Vec<(&str, ScanInput)> = vec![
        ("fixtures/attacks/pattern_i.json", attack_pattern_i()),
        ("fixtures/attacks/pattern_ii.json", attack_pattern_ii()),
        ("fixtures/attacks/pattern_iii.json", attack_pattern_iii()),
        ("fixtures/attacks/pattern_iv.json", attack_pattern_iv()),
        ("fixtures/attacks/pattern_v.json", attack_pattern_v()),
        ("fixtures/attacks/pattern_vi.json", attack_pattern_vi()),
        ("fixtures/attacks/pattern_vii.json", attack_pattern_vii()),
        ("fixtures/attacks/pattern_viii.json", attack_pattern_viii()),
        ("fixtures/benign/single_swap.json", benign_single_swap()),
        ("fixtures/benign/multi_hop_swap.json", benign_multi_hop_swap()),
        ("fixtures/benign/deposit_only.json", benign_deposit_only()),
        ("fixtures/benign/withdraw_only.json", benign_withdraw_only()),
        ("fixtures/benign/deposit_withdraw.json", benign_deposit_withdraw()),
        ("fixtures/benign/stake_only.json", benign_stake_only()),
        ("fixtures/benign/claim_only.json", benign_claim_only()),
        ("fixtures/benign/transfer_out.json", benign_transfer_out()),
        ("fixtures/incidents/uwulend.json", uwulend()),
    ];

    for (rel, input) in &traces {
        let path = root.join(rel);
        fs::create_dir_all(path.parent().expect("fixture parent")).expect("create fixture dir");
        save_trace(&path, input).expect("write fixture");
        println!("wrote {}", path.display());
    }

    write_bundle(&root.join("fixtures/bundles"));
    let incident = &traces.last().expect("incident trace is last").1;
    fs::create_dir_all(root.join("fixtures/golden")).expect("create golden dir");
    write_golden_prompt(&root, incident);
}
