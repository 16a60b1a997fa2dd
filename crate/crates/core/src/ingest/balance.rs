//! Net balance effects of one user invocation.

use std::collections::BTreeMap;

use num_bigint::BigInt;

use super::{IngestError, TransferKind, UserInvocation};
use crate::primitives::{fits_signed_257, Address};

/// Net change of one (account, token) pair across an invocation. When the
/// token's total supply moved (mint/burn activity), every entry of that token
/// also carries the token-wide supply delta.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BalanceDelta {
    pub account: Address,
    pub token: Address,
    pub delta: BigInt,
    pub total_supply_delta: Option<BigInt>,
}

/// Folds an invocation's transfers into per-(account, token) deltas plus
/// per-token supply deltas. Null sinks hold no balance: a mint credits only
/// its receiver, a burn debits only its sender, and both move total supply.
/// Every running sum is confined to the signed 257-bit window so a full
/// 256-bit inflow net of a full outflow still cannot wrap.
pub fn compute_balance_deltas(inv: &UserInvocation) -> Result<Vec<BalanceDelta>, IngestError> {
    let mut balances: BTreeMap<(Address, Address), BigInt> = BTreeMap::new();
    let mut supplies: BTreeMap<Address, BigInt> = BTreeMap::new();

    let bump =
        |map: &mut BTreeMap<(Address, Address), BigInt>, key: (Address, Address), by: BigInt| {
            let slot = map.entry(key).or_default();
            *slot += by;
            if !fits_signed_257(slot) {
                return Err(IngestError::Overflow);
            }
            Ok(())
        };

    for t in &inv.transfers {
        let a = &t.action;
        let v = a.amount.to_bigint();
        match a.kind {
            TransferKind::Transferring => {
                bump(&mut balances, (a.token, a.sender), -v.clone())?;
                bump(&mut balances, (a.token, a.receiver), v)?;
            }
            TransferKind::Minting => {
                bump(&mut balances, (a.token, a.receiver), v.clone())?;
                let s = supplies.entry(a.token).or_default();
                *s += v;
                if !fits_signed_257(s) {
                    return Err(IngestError::Overflow);
                }
            }
            TransferKind::Burning => {
                bump(&mut balances, (a.token, a.sender), -v.clone())?;
                let s = supplies.entry(a.token).or_default();
                *s -= v;
                if !fits_signed_257(s) {
                    return Err(IngestError::Overflow);
                }
            }
        }
    }

    Ok(balances
        .into_iter()
        .map(|((token, account), delta)| BalanceDelta {
            account,
            token,
            delta,
            total_supply_delta: supplies.get(&token).cloned(),
        })
        .collect())
}
