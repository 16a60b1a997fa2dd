//! Price-change inference: turn balance deltas into per-(token, contract)
//! price-direction verdicts.
//!
//! Three backends produce verdicts:
//!
//! * `analytic` — exact rational math over configured pool models; no I/O.
//! * `llm-type1` — prompts a scoring model with the contract's verified
//!   price-relevant source plus the observed balance changes.
//! * `llm-type2` — same idea for unlabeled two-token pools with no source,
//!   substituting a constant-product description for the missing code.
//!
//! The [`dispatch`] module routes each (invocation, contract) pair to the
//! best available backend and merges the results.

mod analytic;
mod backend;
mod dispatch;
mod prompt;
mod scores;
mod source;
mod statements;
#[cfg(test)]
pub(crate) mod stubserver;

pub use analytic::{analytic_infer, PoolState};
pub use backend::{query_backend, BackendKind, InferenceBackendConfig, LLM_KEY_ENV};
pub use dispatch::{infer_price_changes, InferContext};
pub use prompt::{build_prompt_type1, build_prompt_type2};
pub use scores::{parse_scores, resolve_verdicts, ScoredStatement};
pub use source::{extract_price_functions, load_source_bundle, SourceBundle, PRICE_KEYWORDS};
pub use statements::{describe_changes, generate_statements, ChangeDescription, ChangeScope, PriceStatement};

use crate::amm::AmmError;
use crate::primitives::Address;
use crate::template::TemplateError;
use serde::{Deserialize, Serialize};

/// Direction a price moved in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriceDirection {
    Increase,
    Decrease,
}

impl PriceDirection {
    /// Verb form used in statement and change texts.
    pub fn verb(self) -> &'static str {
        match self {
            PriceDirection::Increase => "increases",
            PriceDirection::Decrease => "decreases",
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            PriceDirection::Increase => PriceDirection::Decrease,
            PriceDirection::Decrease => PriceDirection::Increase,
        }
    }
}

/// Which engine produced a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VerdictBackend {
    #[serde(rename = "analytic")]
    Analytic,
    #[serde(rename = "llm-type1")]
    LlmTypeI,
    #[serde(rename = "llm-type2")]
    LlmTypeII,
}

/// One resolved price-change claim: the price of `token` as tracked by
/// `contract` moved in `direction` during `invocation`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PriceChangeVerdict {
    pub token: Address,
    pub contract: Address,
    pub direction: PriceDirection,
    /// 1..=10; how strongly the backend favored this direction.
    pub confidence: u8,
    pub backend: VerdictBackend,
    /// Invocation (0-based, transaction order) the change happened in.
    pub invocation: usize,
}

/// Errors from statement generation, prompting, backends, and parsing.
#[derive(Debug, thiserror::Error)]
pub enum InferError {
    #[error("no verified source bundle for contract {0}")]
    NoSource(Address),
    #[error("pool {pool} exposes {count} tokens; two-token prompts need exactly 2")]
    NotTwoToken { pool: Address, count: usize },
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("no statements to score")]
    NoStatements,
    #[error("price-model code is empty")]
    NoCode,
    #[error("no backend endpoint configured")]
    NoEndpoint,
    #[error("network error: {0}")]
    NetworkError(String),
    #[error("backend rate limited")]
    RateLimited,
    #[error("backend request timed out")]
    Timeout,
    #[error("cannot parse scores from response: {0}")]
    UnparseableResponse(String),
    #[error(transparent)]
    Amm(#[from] AmmError),
    #[error("reading source bundle: {0}")]
    Io(#[from] std::io::Error),
}
