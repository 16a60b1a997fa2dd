//! The optional `pricescope.toml` configuration file and the
//! flags > environment > file precedence helpers.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

/// Environment variable naming the JSON-RPC endpoint for live scans.
pub const RPC_URL_ENV: &str = "PRICESCOPE_RPC_URL";

/// On-disk configuration. Every field is optional; flags and environment
/// variables take precedence over anything set here.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub rpc_url: Option<String>,
    pub bundles_dir: Option<PathBuf>,
    pub min_confidence: Option<u8>,
    pub timeout_secs: Option<u64>,
    pub backend: Option<String>,
    /// Extra router addresses, one per line, merged with the built-in list.
    pub routers_file: Option<PathBuf>,
    #[serde(default)]
    pub llm: LlmFileConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmFileConfig {
    pub endpoint: Option<String>,
    /// Bearer token. The `PRICESCOPE_LLM_KEY` environment variable wins
    /// over this when both are set.
    pub api_key: Option<String>,
    pub model: Option<String>,
    pub max_concurrent: Option<usize>,
    pub request_timeout_secs: Option<u64>,
}

impl FileConfig {
    /// Loads the named file, or `./pricescope.toml` when present, or the
    /// all-defaults configuration when neither exists. An explicitly named
    /// file must exist and parse.
    pub fn load(explicit: Option<&Path>) -> Result<FileConfig, String> {
        let path = match explicit {
            Some(p) => p.to_path_buf(),
            None => {
                let default = Path::new("pricescope.toml");
                if !default.exists() {
                    return Ok(FileConfig::default());
                }
                default.to_path_buf()
            }
        };
        let text = fs::read_to_string(&path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("cannot parse {}: {e}", path.display()))
    }
}

/// RPC endpoint under flag > environment > file precedence.
pub fn resolve_rpc_url(flag: Option<&str>, file: &FileConfig) -> Option<String> {
    flag.map(str::to_string)
        .or_else(|| std::env::var(RPC_URL_ENV).ok().filter(|s| !s.is_empty()))
        .or_else(|| file.rpc_url.clone())
}
