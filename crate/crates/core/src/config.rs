//! TOML run configuration with environment overrides.
//!
//! ```toml
//! [rpc]
//! url = "http://localhost:8545"
//! trace_flavor = "trace_filter"   # or "debug_trace_block"
//! block_span = 100000
//!
//! [explorer]
//! url = "https://api.etherscan.io/api"
//! api_key = "..."
//!
//! [snapshot]
//! hub_url = "https://hub.snapshot.org/graphql"
//! page_size = 1000
//!
//! [retry]
//! max_retries = 5
//! base_delay_ms = 250
//!
//! [scan]
//! block_range = "0:18299999"
//! signatures = ["events.txt"]
//! governance_keywords = ["vote", "proposal"]
//! delegation_keywords = ["delegate"]
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chainio::{RetryPolicy, RpcConfig, ScanRange, TraceFlavor};
use crate::pipeline::Endpoints;
use crate::sigstore::KeywordPolicy;
use crate::snapshotio::DEFAULT_HUB_URL;

pub const ENV_RPC_URL: &str = "METAGOV_RPC_URL";
pub const ENV_EXPLORER_KEY: &str = "ETHERSCAN_API_KEY";
pub const ENV_HUB_URL: &str = "METAGOV_HUB_URL";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RpcSection {
    pub url: String,
    pub trace_flavor: TraceFlavor,
    pub block_span: u64,
}

impl Default for RpcSection {
    fn default() -> Self {
        let base = RpcConfig::new("http://localhost:8545");
        RpcSection { url: base.rpc_url, trace_flavor: base.trace_flavor, block_span: base.block_span }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplorerSection {
    pub url: String,
    pub api_key: Option<String>,
}

impl Default for ExplorerSection {
    fn default() -> Self {
        ExplorerSection { url: RpcConfig::new("").explorer_url, api_key: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnapshotSection {
    pub hub_url: String,
    pub page_size: u64,
}

impl Default for SnapshotSection {
    fn default() -> Self {
        SnapshotSection { hub_url: DEFAULT_HUB_URL.to_owned(), page_size: 1000 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    /// `start:end`, inclusive.
    pub block_range: Option<String>,
    /// Signature dumps loaded on top of the builtin store.
    pub signatures: Vec<PathBuf>,
    pub governance_keywords: Vec<String>,
    pub delegation_keywords: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub rpc: RpcSection,
    pub explorer: ExplorerSection,
    pub snapshot: SnapshotSection,
    pub retry: RetryPolicy,
    pub scan: ScanSection,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let config: Config = toml::from_str(text).map_err(|e| e.to_string())?;
        config.block_range()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|message| ConfigError::Parse { path: path.display().to_string(), message })
    }

    /// Applies `METAGOV_RPC_URL`, `ETHERSCAN_API_KEY` and `METAGOV_HUB_URL`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        if let Some(url) = lookup(ENV_RPC_URL).filter(|s| !s.is_empty()) {
            self.rpc.url = url;
        }
        if let Some(key) = lookup(ENV_EXPLORER_KEY).filter(|s| !s.is_empty()) {
            self.explorer.api_key = Some(key);
        }
        if let Some(url) = lookup(ENV_HUB_URL).filter(|s| !s.is_empty()) {
            self.snapshot.hub_url = url;
        }
    }

    pub fn block_range(&self) -> Result<Option<ScanRange>, String> {
        self.scan.block_range.as_deref().map(str::parse).transpose()
    }

    pub fn endpoints(&self) -> Endpoints {
        let mut rpc = RpcConfig::new(&self.rpc.url);
        rpc.trace_flavor = self.rpc.trace_flavor;
        rpc.block_span = self.rpc.block_span;
        rpc.explorer_url = self.explorer.url.clone();
        rpc.explorer_api_key = self.explorer.api_key.clone();
        Endpoints { rpc, hub_url: self.snapshot.hub_url.clone(), page_size: self.snapshot.page_size }
    }

    /// Keyword lists from the file, falling back to the defaults for any
    /// list left empty.
    pub fn policy(&self) -> KeywordPolicy {
        let default = KeywordPolicy::default();
        let pick = |given: &Vec<String>, fallback: &std::collections::BTreeSet<String>| {
            if given.is_empty() {
                fallback.iter().cloned().collect::<Vec<_>>()
            } else {
                given.clone()
            }
        };
        KeywordPolicy::new(
            pick(&self.scan.governance_keywords, &default.governance),
            pick(&self.scan.delegation_keywords, &default.delegation),
        )
    }
}
