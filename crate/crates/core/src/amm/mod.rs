//! Pool mathematics: constant-product and stable-curve invariants in exact
//! big-integer/rational arithmetic, plus the fine-tuning data synthesizer.

mod cpmm;
mod stableswap;
mod synth;

pub use cpmm::{cpmm_spot_price, cpmm_swap_exact_in, CpmmPool};
pub use stableswap::{
    solve_d_bisection, solve_d_exact, stableswap_residual, stableswap_solve_d,
    stableswap_solve_out_exact, stableswap_swap, StableswapPool,
};
pub use synth::{
    emit_finetune_jsonl, emit_finetune_split, generate_finetune_pairs, render_finetune_line,
    train_split_count, BalancePair, PriceDirectionLabel, SynthContext, SynthError,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::primitives::{Address, TokenAmount};

#[derive(Debug, Error)]
pub enum AmmError {
    #[error("pool reserve is zero")]
    ZeroReserve,
    #[error("swap output would be zero")]
    InsufficientLiquidity,
    #[error("token {0} is not in the pool")]
    UnknownToken(Address),
    #[error("invariant solver did not converge within {0} iterations")]
    NoConvergence(u32),
    #[error("amount out of 256-bit range")]
    Overflow,
    #[error("invalid pool: {0}")]
    BadPool(String),
}

fn default_fee_bps() -> u16 {
    30
}

/// Declarative pool description as it appears in fixture files and reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PoolConfig {
    Cpmm {
        address: Address,
        tokens: [Address; 2],
        reserves: [TokenAmount; 2],
        #[serde(rename = "feeBps", default = "default_fee_bps")]
        fee_bps: u16,
    },
    Stableswap {
        address: Address,
        tokens: Vec<Address>,
        reserves: Vec<TokenAmount>,
        amp: u64,
    },
}

impl PoolConfig {
    pub fn address(&self) -> Address {
        match self {
            PoolConfig::Cpmm { address, .. } | PoolConfig::Stableswap { address, .. } => *address,
        }
    }

    pub fn tokens(&self) -> &[Address] {
        match self {
            PoolConfig::Cpmm { tokens, .. } => tokens,
            PoolConfig::Stableswap { tokens, .. } => tokens,
        }
    }

    pub fn reserves(&self) -> &[TokenAmount] {
        match self {
            PoolConfig::Cpmm { reserves, .. } => reserves,
            PoolConfig::Stableswap { reserves, .. } => reserves,
        }
    }

    pub fn token_index(&self, token: &Address) -> Option<usize> {
        self.tokens().iter().position(|t| t == token)
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            PoolConfig::Cpmm {
                tokens,
                reserves,
                fee_bps,
                ..
            } => {
                if tokens[0] == tokens[1] {
                    return Err("cpmm pool lists the same token twice".into());
                }
                if reserves.iter().any(|r| r.is_zero()) {
                    return Err("cpmm pool has a zero reserve".into());
                }
                if *fee_bps >= 10000 {
                    return Err(format!("cpmm fee of {fee_bps} bps eats the whole input"));
                }
                Ok(())
            }
            PoolConfig::Stableswap {
                tokens,
                reserves,
                amp,
                ..
            } => {
                if tokens.len() < 2 {
                    return Err("stableswap pool needs at least two tokens".into());
                }
                if tokens.len() != reserves.len() {
                    return Err(format!(
                        "stableswap pool has {} tokens but {} reserves",
                        tokens.len(),
                        reserves.len()
                    ));
                }
                for (i, a) in tokens.iter().enumerate() {
                    if tokens[..i].contains(a) {
                        return Err(format!("stableswap pool lists token {a} twice"));
                    }
                }
                if reserves.iter().any(|r| r.is_zero()) {
                    return Err("stableswap pool has a zero reserve".into());
                }
                if *amp == 0 {
                    return Err("stableswap amplification must be positive".into());
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(n: u8) -> Address {
        Address([n; 20])
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = PoolConfig::Cpmm {
            address: a(1),
            tokens: [a(2), a(3)],
            reserves: [TokenAmount::from_u128(10), TokenAmount::from_u128(20)],
            fee_bps: 30,
        };
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"kind\":\"cpmm\""));
        assert!(json.contains("\"feeBps\":30"));
        let back: PoolConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn cpmm_fee_defaults_to_30_bps() {
        let json = r#"{"kind":"cpmm","address":"0x0101010101010101010101010101010101010101",
            "tokens":["0x0202020202020202020202020202020202020202",
                      "0x0303030303030303030303030303030303030303"],
            "reserves":["10","20"]}"#;
        let cfg: PoolConfig = serde_json::from_str(json).unwrap();
        match cfg {
            PoolConfig::Cpmm { fee_bps, .. } => assert_eq!(fee_bps, 30),
            _ => panic!("wrong variant"),
        }
    }

    #[test]
    fn validate_rejects_bad_pools() {
        let zero_reserve = PoolConfig::Cpmm {
            address: a(1),
            tokens: [a(2), a(3)],
            reserves: [TokenAmount::zero(), TokenAmount::from_u128(20)],
            fee_bps: 30,
        };
        assert!(zero_reserve.validate().is_err());

        let dup = PoolConfig::Stableswap {
            address: a(1),
            tokens: vec![a(2), a(2)],
            reserves: vec![TokenAmount::from_u128(1), TokenAmount::from_u128(1)],
            amp: 100,
        };
        assert!(dup.validate().is_err());

        let mismatched = PoolConfig::Stableswap {
            address: a(1),
            tokens: vec![a(2), a(3), a(4)],
            reserves: vec![TokenAmount::from_u128(1), TokenAmount::from_u128(1)],
            amp: 100,
        };
        assert!(mismatched.validate().is_err());
    }
}
