//! Analytic price-direction inference over configured pool models.
//!
//! No I/O and no estimation: spot prices are exact rationals, so a verdict
//! from this backend always carries full confidence.

use super::{PriceChangeVerdict, PriceDirection, VerdictBackend};
use crate::amm::{
    cpmm_spot_price, stableswap_solve_out_exact, AmmError, CpmmPool, PoolConfig, StableswapPool,
};
use crate::primitives::{Address, TokenAmount};
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::One;

/// A pool model at one point in time.
#[derive(Debug, Clone)]
pub enum PoolState {
    Cpmm(CpmmPool),
    Stableswap(StableswapPool),
}

impl PoolState {
    pub fn from_config(cfg: &PoolConfig) -> Result<PoolState, AmmError> {
        cfg.validate().map_err(AmmError::BadPool)?;
        Ok(match cfg {
            PoolConfig::Cpmm { .. } => PoolState::Cpmm(CpmmPool::from_config(cfg).unwrap()),
            PoolConfig::Stableswap { .. } => {
                PoolState::Stableswap(StableswapPool::from_config(cfg).unwrap())
            }
        })
    }

    pub fn address(&self) -> Address {
        match self {
            PoolState::Cpmm(p) => p.address,
            PoolState::Stableswap(p) => p.address,
        }
    }

    pub fn tokens(&self) -> &[Address] {
        match self {
            PoolState::Cpmm(p) => &p.tokens,
            PoolState::Stableswap(p) => &p.tokens,
        }
    }

    pub fn reserves(&self) -> &[TokenAmount] {
        match self {
            PoolState::Cpmm(p) => &p.reserves,
            PoolState::Stableswap(p) => &p.reserves,
        }
    }

    /// Same pool with its reserves replaced (token list and parameters
    /// unchanged). Zero reserves are representable — pricing them errors.
    pub fn with_reserves(&self, reserves: Vec<TokenAmount>) -> Result<PoolState, AmmError> {
        if reserves.len() != self.reserves().len() {
            return Err(AmmError::BadPool(format!(
                "{} reserves for a {}-token pool",
                reserves.len(),
                self.reserves().len()
            )));
        }
        Ok(match self {
            PoolState::Cpmm(p) => {
                let mut p = p.clone();
                p.reserves = [reserves[0].clone(), reserves[1].clone()];
                PoolState::Cpmm(p)
            }
            PoolState::Stableswap(p) => {
                let mut p = p.clone();
                p.reserves = reserves;
                PoolState::Stableswap(p)
            }
        })
    }

    /// Marginal price of `tokens[idx]`, denominated in token 0 (token 1 for
    /// token 0 itself). Constant-product pools quote the exact reserve
    /// ratio; stableswap pools are probed with a small swap —
    /// max(1, reserve/10⁶) units in — and quote the exact rational payout
    /// per unit.
    pub fn marginal_price(&self, idx: usize) -> Result<BigRational, AmmError> {
        match self {
            PoolState::Cpmm(p) => cpmm_spot_price(p, idx),
            PoolState::Stableswap(p) => {
                if idx >= p.reserves.len() {
                    return Err(AmmError::BadPool(format!(
                        "token index {idx} out of range for {} coins",
                        p.reserves.len()
                    )));
                }
                if p.reserves.iter().any(TokenAmount::is_zero) {
                    return Err(AmmError::ZeroReserve);
                }
                let j = if idx == 0 { 1 } else { 0 };
                let probe = p.reserves[idx].as_biguint() / BigUint::from(1_000_000u32);
                let dx = TokenAmount::from_biguint(probe.max(BigUint::one()))
                    .map_err(|_| AmmError::Overflow)?;
                let y = stableswap_solve_out_exact(p, idx, j, &dx)?;
                let dy = BigRational::from_integer(p.reserves[j].to_bigint()) - y;
                Ok(dy / BigRational::from_integer(dx.to_bigint()))
            }
        }
    }
}

/// Compares every token's marginal price across two states of the same pool
/// and emits a full-confidence verdict per token whose price moved.
pub fn analytic_infer(
    before: &PoolState,
    after: &PoolState,
    invocation: usize,
) -> Result<Vec<PriceChangeVerdict>, AmmError> {
    if before.address() != after.address() || before.tokens() != after.tokens() {
        return Err(AmmError::BadPool(
            "price comparison across different pools".to_string(),
        ));
    }
    let contract = before.address();
    let mut out = Vec::new();
    for (idx, token) in before.tokens().iter().enumerate() {
        let p0 = before.marginal_price(idx)?;
        let p1 = after.marginal_price(idx)?;
        let direction = match p1.cmp(&p0) {
            std::cmp::Ordering::Greater => PriceDirection::Increase,
            std::cmp::Ordering::Less => PriceDirection::Decrease,
            std::cmp::Ordering::Equal => continue,
        };
        out.push(PriceChangeVerdict {
            token: *token,
            contract,
            direction,
            confidence: 10,
            backend: VerdictBackend::Analytic,
            invocation,
        });
    }
    Ok(out)
}
