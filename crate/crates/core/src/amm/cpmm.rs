//! Constant-product pool: spot price as an exact ratio of reserves, and the
//! fee-adjusted floor-division swap used by Uniswap-V2-style pairs.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::Zero;

use super::{AmmError, PoolConfig};
use crate::primitives::{Address, TokenAmount};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CpmmPool {
    pub address: Address,
    pub tokens: [Address; 2],
    pub reserves: [TokenAmount; 2],
    pub fee_bps: u16,
}

impl CpmmPool {
    pub fn from_config(cfg: &PoolConfig) -> Option<CpmmPool> {
        match cfg {
            PoolConfig::Cpmm {
                address,
                tokens,
                reserves,
                fee_bps,
            } => Some(CpmmPool {
                address: *address,
                tokens: *tokens,
                reserves: reserves.clone(),
                fee_bps: *fee_bps,
            }),
            _ => None,
        }
    }

    pub fn index_of(&self, token: &Address) -> Result<usize, AmmError> {
        self.tokens
            .iter()
            .position(|t| t == token)
            .ok_or(AmmError::UnknownToken(*token))
    }

    pub fn product(&self) -> BigUint {
        self.reserves[0].as_biguint() * self.reserves[1].as_biguint()
    }
}

/// Spot price of `tokens[idx]` denominated in the other token: the opposing
/// reserve over this one, as an exact rational.
pub fn cpmm_spot_price(pool: &CpmmPool, idx: usize) -> Result<BigRational, AmmError> {
    assert!(idx < 2, "cpmm pools have exactly two sides");
    let this = pool.reserves[idx].as_biguint();
    let other = pool.reserves[1 - idx].as_biguint();
    if this.is_zero() || other.is_zero() {
        return Err(AmmError::ZeroReserve);
    }
    Ok(BigRational::new(
        other.clone().into(),
        this.clone().into(),
    ))
}

/// Swaps `amount_in` of `token_in` into the pool.
///
/// With reserves (x, y), input a, and fee f bps, the output is
/// `floor(y·a·(10000−f) / (10000·x + a·(10000−f)))` — the constant-product
/// solution with the fee shaved off the input before it trades, computed in
/// one division so rounding happens exactly once. The full input (fee
/// included) lands in the reserve.
pub fn cpmm_swap_exact_in(
    pool: &CpmmPool,
    token_in: Address,
    amount_in: &TokenAmount,
) -> Result<(TokenAmount, CpmmPool), AmmError> {
    let i = pool.index_of(&token_in)?;
    let j = 1 - i;
    let x = pool.reserves[i].as_biguint();
    let y = pool.reserves[j].as_biguint();
    if x.is_zero() || y.is_zero() {
        return Err(AmmError::ZeroReserve);
    }
    if amount_in.is_zero() {
        return Err(AmmError::InsufficientLiquidity);
    }
    let a = amount_in.as_biguint();
    let keep = BigUint::from(10000u32 - pool.fee_bps as u32);
    let numer = y * a * &keep;
    let denom = x * 10000u32 + a * &keep;
    let out = numer / denom;
    if out.is_zero() {
        return Err(AmmError::InsufficientLiquidity);
    }
    let amount_out = TokenAmount::from_biguint(out).map_err(|_| AmmError::Overflow)?;

    let mut new_pool = pool.clone();
    new_pool.reserves[i] = pool.reserves[i]
        .checked_add(amount_in)
        .map_err(|_| AmmError::Overflow)?;
    new_pool.reserves[j] = pool.reserves[j]
        .checked_sub(&amount_out)
        .map_err(|_| AmmError::InsufficientLiquidity)?;
    Ok((amount_out, new_pool))
}
