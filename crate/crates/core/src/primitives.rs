//! Fundamental on-chain value types: addresses, 32-byte words, selectors,
//! bounded 256-bit token amounts and token metadata.
//!
//! All hex text is lowercase and `0x`-prefixed. Token amounts are unsigned and
//! strictly below 2^256; arithmetic on them is checked so overflow is an error,
//! never a wrap.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint};
use num_traits::{Signed, Zero};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PrimitiveError {
    #[error("invalid hex string `{0}`: expected 0x-prefixed, {1} hex chars")]
    BadHex(String, usize),
    #[error("amount does not fit in 256 bits")]
    AmountOverflow,
    #[error("cannot parse `{0}` as a token amount")]
    BadAmount(String),
}

fn parse_fixed_hex<const N: usize>(s: &str) -> Result<[u8; N], PrimitiveError> {
    let bad = || PrimitiveError::BadHex(s.to_string(), N * 2);
    let body = s.strip_prefix("0x").ok_or_else(bad)?;
    if body.len() != N * 2 {
        return Err(bad());
    }
    let mut out = [0u8; N];
    hex::decode_to_slice(body, &mut out).map_err(|_| bad())?;
    Ok(out)
}

macro_rules! fixed_bytes {
    ($name:ident, $len:expr) => {
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
        pub struct $name(pub [u8; $len]);

        impl $name {
            pub const ZERO: $name = $name([0u8; $len]);

            pub fn as_bytes(&self) -> &[u8; $len] {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "0x{}", hex::encode(self.0))
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{self}")
            }
        }

        impl FromStr for $name {
            type Err = PrimitiveError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                parse_fixed_hex::<$len>(s).map($name)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
                ser.serialize_str(&self.to_string())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
                let s = String::deserialize(de)?;
                s.parse().map_err(de::Error::custom)
            }
        }
    };
}

fixed_bytes!(Address, 20);
fixed_bytes!(Word, 32);
fixed_bytes!(Selector, 4);

/// The conventional burn sink `0x…dead`.
const DEAD_ADDRESS: Address = Address([
    0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0xde, 0xad,
]);

impl Address {
    /// True for the zero address and the `0x…dead` sink, the two addresses
    /// treated as "no account" when classifying mints and burns.
    pub fn is_null(&self) -> bool {
        *self == Address::ZERO || *self == DEAD_ADDRESS
    }

    /// Abbreviated form (`0x1234…cdef`) for labels and fallback token names.
    pub fn short(&self) -> String {
        let full = hex::encode(self.0);
        format!("0x{}…{}", &full[..4], &full[36..])
    }

    /// Reads an address out of the low 20 bytes of a 32-byte topic word.
    pub fn from_topic(word: &Word) -> Address {
        let mut out = [0u8; 20];
        out.copy_from_slice(&word.0[12..]);
        Address(out)
    }
}

/// Coarse account classification within one transaction trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccountKind {
    Eoa,
    Contract,
    Null,
}

impl AccountKind {
    /// Classifies an address relative to a trace: the null sinks, the signing
    /// EOA, and (by elimination) contracts. Inside a single external
    /// transaction every non-initiator participant in the call tree is a
    /// contract.
    pub fn classify(addr: &Address, initiator: &Address) -> AccountKind {
        if addr.is_null() {
            AccountKind::Null
        } else if addr == initiator {
            AccountKind::Eoa
        } else {
            AccountKind::Contract
        }
    }
}

fn two_pow_256() -> &'static BigUint {
    static CELL: OnceLock<BigUint> = OnceLock::new();
    CELL.get_or_init(|| BigUint::from(1u8) << 256)
}

/// Inclusive bounds of the signed 257-bit accumulator window used for balance
/// deltas: [-2^256, 2^256 - 1].
pub fn fits_signed_257(v: &BigInt) -> bool {
    static LO: OnceLock<BigInt> = OnceLock::new();
    static HI: OnceLock<BigInt> = OnceLock::new();
    let lo = LO.get_or_init(|| -BigInt::from(two_pow_256().clone()));
    let hi = HI.get_or_init(|| BigInt::from(two_pow_256().clone()) - 1);
    v >= lo && v <= hi
}

/// An unsigned token quantity in base units, invariant: `< 2^256`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TokenAmount(BigUint);

impl TokenAmount {
    pub fn zero() -> TokenAmount {
        TokenAmount(BigUint::zero())
    }

    pub fn from_biguint(v: BigUint) -> Result<TokenAmount, PrimitiveError> {
        if &v >= two_pow_256() {
            return Err(PrimitiveError::AmountOverflow);
        }
        Ok(TokenAmount(v))
    }

    pub fn from_u128(v: u128) -> TokenAmount {
        TokenAmount(BigUint::from(v))
    }

    /// Big-endian 32-byte word (how amounts arrive in log data).
    pub fn from_word(word: &Word) -> TokenAmount {
        TokenAmount(BigUint::from_bytes_be(&word.0))
    }

    pub fn as_biguint(&self) -> &BigUint {
        &self.0
    }

    pub fn to_bigint(&self) -> BigInt {
        BigInt::from(self.0.clone())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn checked_add(&self, rhs: &TokenAmount) -> Result<TokenAmount, PrimitiveError> {
        TokenAmount::from_biguint(&self.0 + &rhs.0)
    }

    pub fn checked_sub(&self, rhs: &TokenAmount) -> Result<TokenAmount, PrimitiveError> {
        if rhs.0 > self.0 {
            return Err(PrimitiveError::AmountOverflow);
        }
        Ok(TokenAmount(&self.0 - &rhs.0))
    }

    /// Applies a signed delta, erroring when the result would leave [0, 2^256).
    pub fn checked_add_signed(&self, delta: &BigInt) -> Result<TokenAmount, PrimitiveError> {
        let next = self.to_bigint() + delta;
        if next.is_negative() {
            return Err(PrimitiveError::AmountOverflow);
        }
        TokenAmount::from_biguint(next.to_biguint().expect("non-negative"))
    }
}

impl fmt::Display for TokenAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for TokenAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for TokenAmount {
    type Err = PrimitiveError;

    /// Accepts decimal (`"1000"`) and hex (`"0x3e8"`) renderings.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PrimitiveError::BadAmount(s.to_string());
        let v = if let Some(body) = s.strip_prefix("0x") {
            if body.is_empty() {
                return Err(bad());
            }
            BigUint::parse_bytes(body.as_bytes(), 16).ok_or_else(bad)?
        } else {
            if s.is_empty() {
                return Err(bad());
            }
            BigUint::parse_bytes(s.as_bytes(), 10).ok_or_else(bad)?
        };
        TokenAmount::from_biguint(v)
    }
}

impl Serialize for TokenAmount {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for TokenAmount {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// Metadata for one ERC-20 token. `symbol` may be empty and `decimals` absent
/// for tokens the fixture does not describe.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub address: Address,
    #[serde(default)]
    pub symbol: String,
    #[serde(default)]
    pub decimals: Option<u8>,
}

/// Lookup of token metadata by address, with sensible fallbacks for unknown
/// tokens (short-address names, raw base-unit magnitudes).
#[derive(Debug, Clone, Default)]
pub struct TokenRegistry {
    tokens: BTreeMap<Address, Token>,
}

impl TokenRegistry {
    pub fn new(tokens: impl IntoIterator<Item = Token>) -> TokenRegistry {
        TokenRegistry {
            tokens: tokens.into_iter().map(|t| (t.address, t)).collect(),
        }
    }

    pub fn get(&self, addr: &Address) -> Option<&Token> {
        self.tokens.get(addr)
    }

    /// Symbol when known and non-empty, abbreviated address otherwise.
    pub fn name(&self, addr: &Address) -> String {
        match self.tokens.get(addr) {
            Some(t) if !t.symbol.is_empty() => t.symbol.clone(),
            _ => addr.short(),
        }
    }

    /// Renders a magnitude, scaling by the token's decimals when known.
    pub fn format_magnitude(&self, addr: &Address, value: &BigUint) -> String {
        match self.tokens.get(addr).and_then(|t| t.decimals) {
            Some(0) | None => value.to_string(),
            Some(d) => {
                let scale = BigUint::from(10u8).pow(u32::from(d));
                let whole = value / &scale;
                let frac = value % &scale;
                if frac.is_zero() {
                    whole.to_string()
                } else {
                    let digits = format!("{:0>width$}", frac.to_string(), width = d as usize);
                    format!("{}.{}", whole, digits.trim_end_matches('0'))
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn address_round_trip_and_short_form() {
        let a: Address = "0x7a250d5630b4cf539739df2c5dacb4c659f2488d".parse().unwrap();
        assert_eq!(a.to_string(), "0x7a250d5630b4cf539739df2c5dacb4c659f2488d");
        assert_eq!(a.short(), "0x7a25…488d");
        assert!("0x7a25".parse::<Address>().is_err());
        assert!("7a250d5630b4cf539739df2c5dacb4c659f2488d".parse::<Address>().is_err());
    }

    #[test]
    fn null_detection_covers_zero_and_dead() {
        assert!(Address::ZERO.is_null());
        let dead: Address = "0x000000000000000000000000000000000000dead".parse().unwrap();
        assert!(dead.is_null());
        let live: Address = "0x000000000000000000000000000000000000beef".parse().unwrap();
        assert!(!live.is_null());
    }

    #[test]
    fn account_kind_classification() {
        let initiator: Address = "0x1111111111111111111111111111111111111111".parse().unwrap();
        let other: Address = "0x2222222222222222222222222222222222222222".parse().unwrap();
        assert_eq!(AccountKind::classify(&Address::ZERO, &initiator), AccountKind::Null);
        assert_eq!(AccountKind::classify(&initiator, &initiator), AccountKind::Eoa);
        assert_eq!(AccountKind::classify(&other, &initiator), AccountKind::Contract);
    }

    #[test]
    fn token_amount_bounds() {
        let max = TokenAmount::from_biguint((BigUint::from(1u8) << 256) - 1u8).unwrap();
        assert!(TokenAmount::from_biguint(BigUint::from(1u8) << 256).is_err());
        assert_eq!(
            max.checked_add(&TokenAmount::from_u128(1)),
            Err(PrimitiveError::AmountOverflow)
        );
        assert_eq!(
            TokenAmount::from_u128(3).checked_sub(&TokenAmount::from_u128(5)),
            Err(PrimitiveError::AmountOverflow)
        );
        let x: TokenAmount = "0x3e8".parse().unwrap();
        assert_eq!(x, TokenAmount::from_u128(1000));
        assert_eq!("1000".parse::<TokenAmount>().unwrap(), x);
    }

    #[test]
    fn signed_257_window() {
        let hi = BigInt::from(BigUint::from(1u8) << 256) - 1;
        let lo = -BigInt::from(BigUint::from(1u8) << 256);
        assert!(fits_signed_257(&hi));
        assert!(fits_signed_257(&lo));
        assert!(!fits_signed_257(&(hi + 1)));
        assert!(!fits_signed_257(&(lo - 1)));
    }

    #[test]
    fn magnitude_formatting_scales_by_decimals() {
        let weth: Address = "0xc02aaa39b223fe8d0a0e5c4f27ead9083c756cc2".parse().unwrap();
        let reg = TokenRegistry::new([Token {
            address: weth,
            symbol: "WETH".into(),
            decimals: Some(18),
        }]);
        let one_and_half = BigUint::from(15u8) * BigUint::from(10u8).pow(17);
        assert_eq!(reg.format_magnitude(&weth, &one_and_half), "1.5");
        assert_eq!(reg.format_magnitude(&weth, &BigUint::from(10u8).pow(18)), "1");
        assert_eq!(reg.format_magnitude(&weth, &BigUint::from(1u8)), "0.000000000000000001");
        let unknown: Address = "0x9999999999999999999999999999999999999999".parse().unwrap();
        assert_eq!(reg.format_magnitude(&unknown, &BigUint::from(42u8)), "42");
        assert_eq!(reg.name(&unknown), "0x9999…9999");
        assert_eq!(reg.name(&weth), "WETH");
    }
}
