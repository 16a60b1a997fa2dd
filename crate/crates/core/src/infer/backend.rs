//! Scoring-backend configuration and the HTTP query path.

use super::InferError;
use serde_json::{json, Value};
use std::time::Duration;

/// Which inference route to use for a transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    /// Pick per contract: analytic where a pool model exists, type-1 where
    /// verified source exists, type-2 for labeled two-token pools.
    Auto,
    /// Pool-model math only; never performs I/O.
    Analytic,
    /// Verified-source prompts only.
    LlmType1,
    /// Constant-product-description prompts only.
    LlmType2,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(BackendKind::Auto),
            "analytic" => Ok(BackendKind::Analytic),
            "llm-type1" => Ok(BackendKind::LlmType1),
            "llm-type2" => Ok(BackendKind::LlmType2),
            other => Err(format!(
                "unknown backend `{other}` (expected auto, analytic, llm-type1, or llm-type2)"
            )),
        }
    }
}

/// Environment variable holding the scoring-backend API key.
pub const LLM_KEY_ENV: &str = "PRICESCOPE_LLM_KEY";

/// Sampling is pinned so score parsing stays reproducible.
pub const TEMPERATURE: f64 = 0.0;
pub const TOP_P: f64 = 1.0;

const MAX_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone)]
pub struct InferenceBackendConfig {
    pub kind: BackendKind,
    /// Chat-completions endpoint URL; `None` disables the LLM routes.
    pub endpoint: Option<String>,
    pub model: String,
    /// Bearer token; falls back to `PRICESCOPE_LLM_KEY` when unset.
    pub api_key: Option<String>,
    /// Parallelism bound for batch scans.
    pub max_concurrent: usize,
    /// Per-request timeout.
    pub timeout_secs: u64,
    /// Base delay between retry attempts (doubles each retry).
    pub retry_backoff_ms: u64,
    pub type1_template: String,
    pub type2_template: String,
}

impl Default for InferenceBackendConfig {
    fn default() -> Self {
        InferenceBackendConfig {
            kind: BackendKind::Auto,
            endpoint: None,
            model: "price-scorer".to_string(),
            api_key: None,
            max_concurrent: 4,
            timeout_secs: 60,
            retry_backoff_ms: 250,
            type1_template: include_str!("../../../../templates/type1.txt").to_string(),
            type2_template: include_str!("../../../../templates/type2.txt").to_string(),
        }
    }
}

impl InferenceBackendConfig {
    pub fn resolved_api_key(&self) -> Option<String> {
        self.api_key
            .clone()
            .or_else(|| std::env::var(LLM_KEY_ENV).ok())
    }
}

/// Sends one prompt to the configured chat endpoint and returns the raw
/// completion text. Transport failures and 429/5xx responses are retried
/// up to three attempts with doubling backoff; 4xx responses other than
/// 429 fail immediately.
pub fn query_backend(cfg: &InferenceBackendConfig, prompt: &str) -> Result<String, InferError> {
    let endpoint = cfg.endpoint.as_deref().ok_or(InferError::NoEndpoint)?;
    let agent = ureq::AgentBuilder::new()
        .timeout(Duration::from_secs(cfg.timeout_secs))
        .build();
    let body = json!({
        "model": cfg.model,
        "messages": [{ "role": "user", "content": prompt }],
        "temperature": TEMPERATURE,
        "top_p": TOP_P,
    });

    let mut last_err = InferError::NetworkError("no attempt made".to_string());
    for attempt in 0..MAX_ATTEMPTS {
        if attempt > 0 {
            std::thread::sleep(Duration::from_millis(
                cfg.retry_backoff_ms << (attempt - 1),
            ));
        }
        let mut req = agent.post(endpoint);
        if let Some(key) = cfg.resolved_api_key() {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        match req.send_json(body.clone()) {
            Ok(resp) => {
                let reply: Value = resp
                    .into_json()
                    .map_err(|e| InferError::UnparseableResponse(format!("bad json: {e}")))?;
                return reply
                    .pointer("/choices/0/message/content")
                    .and_then(Value::as_str)
                    .map(str::to_string)
                    .ok_or_else(|| {
                        InferError::UnparseableResponse(
                            "reply carries no choices[0].message.content".to_string(),
                        )
                    });
            }
            Err(ureq::Error::Status(429, _)) => {
                last_err = InferError::RateLimited;
            }
            Err(ureq::Error::Status(code, _)) if code >= 500 => {
                last_err = InferError::NetworkError(format!("server error {code}"));
            }
            Err(ureq::Error::Status(code, _)) => {
                return Err(InferError::NetworkError(format!("http error {code}")));
            }
            Err(ureq::Error::Transport(t)) => {
                let msg = t.to_string();
                last_err = if msg.to_ascii_lowercase().contains("timed out") {
                    InferError::Timeout
                } else {
                    InferError::NetworkError(msg)
                };
            }
        }
    }
    Err(last_err)
}
