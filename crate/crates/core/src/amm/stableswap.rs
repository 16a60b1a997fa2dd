//! Stable-curve pool: the amplified invariant solved with exact rational
//! Newton iteration (bounded by a fixed-point grid so denominators stay
//! small), cross-checked by an independent bisection solver.
//!
//! With n coins of balances x_i, sum S, product P, amplification a and
//! A = a·n^n, the invariant ties D to the balances via
//! `A·S + D = A·D + D^(n+1) / (n^n·P)`.
//! Balanced pools satisfy it exactly at D = S; imbalance pulls D below S.

use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::{AmmError, PoolConfig};
use crate::primitives::{Address, TokenAmount};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StableswapPool {
    pub address: Address,
    pub tokens: Vec<Address>,
    pub reserves: Vec<TokenAmount>,
    pub amp: u64,
}

impl StableswapPool {
    pub fn from_config(cfg: &PoolConfig) -> Option<StableswapPool> {
        match cfg {
            PoolConfig::Stableswap {
                address,
                tokens,
                reserves,
                amp,
            } => Some(StableswapPool {
                address: *address,
                tokens: tokens.clone(),
                reserves: reserves.clone(),
                amp: *amp,
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
}

const MAX_ITERS: u32 = 256;

fn grid() -> &'static BigInt {
    static GRID: OnceLock<BigInt> = OnceLock::new();
    GRID.get_or_init(|| BigInt::from(10u8).pow(36))
}

fn tolerance(exp: u32) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(10u8).pow(exp))
}

/// Snaps a rational to the 10⁻³⁶ grid (round half up). Applied after every
/// Newton step so exact-arithmetic denominators cannot snowball.
fn snap(x: &BigRational) -> BigRational {
    let scaled = x * BigRational::from_integer(grid().clone());
    let rounded = (scaled + BigRational::new(BigInt::one(), BigInt::from(2u8))).floor();
    BigRational::new(rounded.to_integer(), grid().clone())
}

fn to_rationals(reserves: &[TokenAmount]) -> Vec<BigRational> {
    reserves
        .iter()
        .map(|r| BigRational::from_integer(r.to_bigint()))
        .collect()
}

fn sum_product(xs: &[BigRational]) -> (BigRational, BigRational) {
    let mut s = BigRational::zero();
    let mut p = BigRational::one();
    for x in xs {
        s += x;
        p *= x;
    }
    (s, p)
}

/// Relative gap between the two sides of the invariant at a candidate D:
/// |(A·S + D) − (A·D + D^(n+1)/(n^n·P))| divided by the right-hand side.
pub fn stableswap_residual(reserves: &[BigRational], amp: u64, d: &BigRational) -> BigRational {
    let n = reserves.len() as u32;
    let (s, p) = sum_product(reserves);
    let nn = BigRational::from_integer(BigInt::from(n).pow(n));
    let ann = BigRational::from_integer(BigInt::from(amp)) * &nn;
    let lhs = &ann * &s + d;
    let rhs = &ann * d + d.pow(n as i32 + 1) / (&nn * &p);
    (lhs - &rhs).abs() / rhs
}

/// Solves the invariant for D by Newton iteration seeded at S, keeping
/// exact rationals snapped to the fixed grid. Errors if 256 iterations leave
/// the relative residual above 10⁻¹⁰.
pub fn solve_d_exact(reserves: &[TokenAmount], amp: u64) -> Result<BigRational, AmmError> {
    if reserves.len() < 2 {
        return Err(AmmError::BadPool("need at least two reserves".into()));
    }
    if amp == 0 {
        return Err(AmmError::BadPool("amplification must be positive".into()));
    }
    if reserves.iter().any(|r| r.is_zero()) {
        return Err(AmmError::ZeroReserve);
    }
    let xs = to_rationals(reserves);
    let n = xs.len() as u32;
    let (s, p) = sum_product(&xs);
    let nn = BigRational::from_integer(BigInt::from(n).pow(n));
    let ann = BigRational::from_integer(BigInt::from(amp)) * &nn;
    let n_rat = BigRational::from_integer(BigInt::from(n));
    let step_floor = tolerance(18);

    let mut d = s.clone();
    for _ in 0..MAX_ITERS {
        let d_p = d.pow(n as i32 + 1) / (&nn * &p);
        let numer = (&ann * &s + &n_rat * &d_p) * &d;
        let denom = (&ann - BigRational::one()) * &d + (&n_rat + BigRational::one()) * &d_p;
        let next = snap(&(numer / denom));
        let moved = (&next - &d).abs();
        d = next;
        if moved <= step_floor {
            break;
        }
    }
    if stableswap_residual(&xs, amp, &d) <= tolerance(10) {
        Ok(d)
    } else {
        Err(AmmError::NoConvergence(MAX_ITERS))
    }
}

/// D rounded half-up to whole token base units.
pub fn stableswap_solve_d(pool: &StableswapPool) -> Result<TokenAmount, AmmError> {
    let d = solve_d_exact(&pool.reserves, pool.amp)?;
    let rounded = (d + BigRational::new(BigInt::one(), BigInt::from(2u8))).floor();
    TokenAmount::from_biguint(
        rounded
            .to_integer()
            .to_biguint()
            .ok_or(AmmError::Overflow)?,
    )
    .map_err(|_| AmmError::Overflow)
}

/// Independent D solver: bisects the invariant gap on (0, S], where the gap
/// is positive below the root and non-positive at S (arithmetic mean ≥
/// geometric mean). Used as the oracle the Newton path is tested against.
pub fn solve_d_bisection(reserves: &[TokenAmount], amp: u64) -> Result<BigRational, AmmError> {
    if reserves.len() < 2 || amp == 0 {
        return Err(AmmError::BadPool("bad bisection input".into()));
    }
    if reserves.iter().any(|r| r.is_zero()) {
        return Err(AmmError::ZeroReserve);
    }
    let xs = to_rationals(reserves);
    let n = xs.len() as u32;
    let (s, p) = sum_product(&xs);
    let nn = BigRational::from_integer(BigInt::from(n).pow(n));
    let ann = BigRational::from_integer(BigInt::from(amp)) * &nn;
    let gap = |d: &BigRational| -> BigRational {
        &ann * &s + d - (&ann * d + d.pow(n as i32 + 1) / (&nn * &p))
    };
    if gap(&s).is_zero() {
        return Ok(s.clone());
    }
    let mut lo = BigRational::zero();
    let mut hi = s.clone();
    let eps = tolerance(6);
    while (&hi - &lo) > eps {
        let mid = (&lo + &hi) / BigRational::from_integer(BigInt::from(2u8));
        if gap(&mid).is_positive() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / BigRational::from_integer(BigInt::from(2u8)))
}

/// Exact post-swap balance of coin `j` after `dx` of coin `i` enters, with D
/// held fixed: the positive root of y² + b·y = c where
/// b = S′ + D/A − D and c = D^(n+1)/(A·n^n·P′), primed sums/products running
/// over every coin but `j` with coin `i` already bumped.
pub fn stableswap_solve_out_exact(
    pool: &StableswapPool,
    i: usize,
    j: usize,
    dx: &TokenAmount,
) -> Result<BigRational, AmmError> {
    let n_coins = pool.reserves.len();
    if i == j || i >= n_coins || j >= n_coins {
        return Err(AmmError::BadPool(format!(
            "swap indices {i}->{j} invalid for {n_coins} coins"
        )));
    }
    if dx.is_zero() {
        return Err(AmmError::InsufficientLiquidity);
    }
    let d = solve_d_exact(&pool.reserves, pool.amp)?;

    let mut xs = to_rationals(&pool.reserves);
    xs[i] += BigRational::from_integer(dx.to_bigint());
    let n = xs.len() as u32;
    let others: Vec<&BigRational> = xs
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != j)
        .map(|(_, x)| x)
        .collect();
    let mut s_p = BigRational::zero();
    let mut p_p = BigRational::one();
    for x in &others {
        s_p += *x;
        p_p *= *x;
    }
    let nn = BigRational::from_integer(BigInt::from(n).pow(n));
    let ann = BigRational::from_integer(BigInt::from(pool.amp)) * &nn;
    let b = &s_p + &d / &ann - &d;
    let c = d.pow(n as i32 + 1) / (&ann * &nn * &p_p);

    // Newton on y² + b·y − c: each step maps y to (y² + c)/(2y + b), landing
    // at or above the positive root and then descending onto it.
    let step_floor = tolerance(18);
    let two = BigRational::from_integer(BigInt::from(2u8));
    let mut y = d.clone();
    for _ in 0..MAX_ITERS {
        let next = snap(&((&y * &y + &c) / (&two * &y + &b)));
        let moved = (&next - &y).abs();
        y = next;
        if moved <= step_floor {
            break;
        }
    }
    let residual = (&y * &y + &b * &y - &c).abs() / (&y * &y + &c);
    if residual > tolerance(10) {
        return Err(AmmError::NoConvergence(MAX_ITERS));
    }
    Ok(y)
}

/// Swaps `dx` of coin `i` for coin `j`, flooring the payout to whole units
/// (the sub-unit remainder stays in the pool).
pub fn stableswap_swap(
    pool: &StableswapPool,
    i: usize,
    j: usize,
    dx: &TokenAmount,
) -> Result<(TokenAmount, StableswapPool), AmmError> {
    let y = stableswap_solve_out_exact(pool, i, j, dx)?;
    let x_j = BigRational::from_integer(pool.reserves[j].to_bigint());
    let dy_exact = &x_j - &y;
    if !dy_exact.is_positive() {
        return Err(AmmError::InsufficientLiquidity);
    }
    let dy_floor = dy_exact.floor().to_integer();
    if dy_floor.is_zero() {
        return Err(AmmError::InsufficientLiquidity);
    }
    let dy = TokenAmount::from_biguint(dy_floor.to_biguint().ok_or(AmmError::Overflow)?)
        .map_err(|_| AmmError::Overflow)?;

    let mut next = pool.clone();
    next.reserves[i] = pool.reserves[i]
        .checked_add(dx)
        .map_err(|_| AmmError::Overflow)?;
    next.reserves[j] = pool.reserves[j]
        .checked_sub(&dy)
        .map_err(|_| AmmError::InsufficientLiquidity)?;
    Ok((dy, next))
}
