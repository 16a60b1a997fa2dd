//! Candidate price statements and observed-change descriptions, the two
//! text blocks a scoring prompt is assembled from.

use super::PriceDirection;
use crate::ingest::BalanceDelta;
use crate::primitives::{Address, TokenRegistry};
use num_bigint::BigUint;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

/// One scoreable claim about a (token, contract) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PriceStatement {
    pub token: Address,
    pub contract: Address,
    pub direction: PriceDirection,
    pub text: String,
}

/// What a balance movement applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "scope", content = "contract")]
pub enum ChangeScope {
    /// A contract's balance of the token moved.
    ContractBalance(Address),
    /// The token's total supply moved (mint or burn).
    TotalSupply,
}

/// One observed balance movement, rendered as prompt text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChangeDescription {
    pub token: Address,
    #[serde(flatten)]
    pub scope: ChangeScope,
    pub direction: PriceDirection,
    /// Always positive; the sign lives in `direction`.
    #[serde(with = "biguint_decimal")]
    pub magnitude: BigUint,
    pub text: String,
}

/// Base-units magnitudes serialize as decimal strings: they routinely
/// exceed every native JSON number width.
mod biguint_decimal {
    use num_bigint::BigUint;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(de::Error::custom)
    }
}

fn statement_text(token: &str, contract: &str, direction: PriceDirection) -> String {
    format!(
        "The price of {} in {} {} after change",
        token,
        contract,
        direction.verb()
    )
}

/// Builds the full cross product of candidate statements: for every token and
/// every contract, one increase claim and one decrease claim, in
/// (token, contract) order with the increase claim first.
pub fn generate_statements(
    tokens: &[Address],
    contracts: &[Address],
    registry: &TokenRegistry,
) -> Vec<PriceStatement> {
    let mut out = Vec::with_capacity(tokens.len() * contracts.len() * 2);
    for token in tokens {
        for contract in contracts {
            for direction in [PriceDirection::Increase, PriceDirection::Decrease] {
                out.push(PriceStatement {
                    token: *token,
                    contract: *contract,
                    direction,
                    text: statement_text(&registry.name(token), &registry.name(contract), direction),
                });
            }
        }
    }
    out
}

/// Renders an invocation's nonzero balance deltas as change lines: one line
/// per (contract, token) balance movement, then one line per token whose
/// total supply moved. Amounts are shown as magnitudes scaled by the token's
/// decimals; the sign becomes the verb.
pub fn describe_changes(deltas: &[BalanceDelta], registry: &TokenRegistry) -> Vec<ChangeDescription> {
    let mut out = Vec::new();
    for d in deltas {
        if d.delta.is_zero() {
            continue;
        }
        let direction = if d.delta.sign() == num_bigint::Sign::Plus {
            PriceDirection::Increase
        } else {
            PriceDirection::Decrease
        };
        let magnitude = d.delta.magnitude().clone();
        let text = format!(
            "The balance of {} in {} {} by {}",
            registry.name(&d.token),
            registry.name(&d.account),
            direction.verb(),
            registry.format_magnitude(&d.token, &magnitude),
        );
        out.push(ChangeDescription {
            token: d.token,
            scope: ChangeScope::ContractBalance(d.account),
            direction,
            magnitude,
            text,
        });
    }

    let mut seen = std::collections::BTreeSet::new();
    for d in deltas {
        let Some(supply) = &d.total_supply_delta else {
            continue;
        };
        if supply.is_zero() || !seen.insert(d.token) {
            continue;
        }
        let direction = if supply.sign() == num_bigint::Sign::Plus {
            PriceDirection::Increase
        } else {
            PriceDirection::Decrease
        };
        let magnitude = supply.magnitude().clone();
        let text = format!(
            "The total supply of {} {} by {}",
            registry.name(&d.token),
            direction.verb(),
            registry.format_magnitude(&d.token, &magnitude),
        );
        out.push(ChangeDescription {
            token: d.token,
            scope: ChangeScope::TotalSupply,
            direction,
            magnitude,
            text,
        });
    }
    out
}
