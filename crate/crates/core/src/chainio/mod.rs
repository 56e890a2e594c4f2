//! Access to on-chain data: traces, logs, contract code and verified ABIs.
//!
//! Everything above this module talks to a [`ChainSource`]. Two backends
//! exist: [`FixtureChain`], which serves hand-built or recorded JSONL
//! files, and [`RpcChain`], which speaks JSON-RPC to an archive node and
//! REST to a block explorer through a [`Transport`] that can record and
//! replay every exchange.

mod fixture;
mod rpc;
mod transport;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fixture::{CodeSpan, FixtureChain};
pub use rpc::{FixtureResponder, RpcChain, RpcConfig, TraceFlavor};
pub use transport::{
    HttpRequest, HttpTransport, Method, RecordingTransport, ReplayTransport, RetryPolicy, Transport, TransportError,
};

use crate::abidec::{AbiDocument, AbiError};
use crate::model::{AccountKind, Address, CallType, CanonicalSignature, EventLogRecord, TopicHash, TraceRecord};

/// Highest block of the production scan range (inclusive).
pub const PRODUCTION_END_BLOCK: u64 = 18_299_999;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("data unavailable: {0}")]
    DataUnavailable(String),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("json-rpc error: {0}")]
    Rpc(String),
    #[error("metadata parse error for {address}: {source}")]
    MetadataParse { address: Address, source: AbiError },
    #[error("fixture error: {0}")]
    Fixture(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl ChainError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, ChainError::Transport(t) if t.is_retryable())
    }
}

/// An inclusive block range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScanRange {
    pub start_block: u64,
    pub end_block: u64,
}

impl ScanRange {
    pub fn new(start_block: u64, end_block: u64) -> Result<Self, String> {
        if start_block > end_block {
            return Err(format!("start block {start_block} is after end block {end_block}"));
        }
        Ok(ScanRange { start_block, end_block })
    }

    pub fn production() -> Self {
        ScanRange { start_block: 0, end_block: PRODUCTION_END_BLOCK }
    }

    pub fn contains(&self, block: u64) -> bool {
        (self.start_block..=self.end_block).contains(&block)
    }

    pub fn covers(&self, other: &ScanRange) -> bool {
        self.start_block <= other.start_block && other.end_block <= self.end_block
    }
}

impl fmt::Display for ScanRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start_block, self.end_block)
    }
}

impl FromStr for ScanRange {
    type Err = String;

    /// Parses `A:B`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once(':').ok_or_else(|| format!("expected A:B, got {s:?}"))?;
        let a = a.trim().parse().map_err(|_| format!("bad start block in {s:?}"))?;
        let b = b.trim().parse().map_err(|_| format!("bad end block in {s:?}"))?;
        ScanRange::new(a, b)
    }
}

/// A raw data provider. Implementations must be deterministic for a fixed
/// underlying dataset.
pub trait ChainSource: Send + Sync {
    /// Calls of any type whose `to` is `target`.
    fn calls_to(&self, target: Address, range: ScanRange) -> Result<Vec<TraceRecord>, ChainError>;

    /// Calls of any type issued by `caller`.
    fn calls_from(&self, caller: Address, range: ScanRange) -> Result<Vec<TraceRecord>, ChainError>;

    fn code_at(&self, address: Address, block: u64) -> Result<Vec<u8>, ChainError>;

    /// The verified ABI document, or `None` when the source has none.
    fn contract_abi(&self, address: Address) -> Result<Option<serde_json::Value>, ChainError>;

    /// Logs emitted by `emitter`, optionally filtered on topic 0. Order is
    /// not guaranteed; [`fetch_logs`] sorts.
    fn logs(
        &self,
        emitter: Address,
        range: ScanRange,
        topic0: Option<TopicHash>,
    ) -> Result<Vec<EventLogRecord>, ChainError>;

    /// Tag describing where metadata came from.
    fn provenance(&self) -> String;
}

/// Every address that called `target` in `range`, with call counts.
/// Contract creations are not calls and are excluded.
pub fn contract_invocators(
    chain: &dyn ChainSource,
    target: Address,
    range: ScanRange,
) -> Result<BTreeMap<Address, u64>, ChainError> {
    let mut counts = BTreeMap::new();
    for trace in chain.calls_to(target, range)? {
        if trace.to == target && trace.call_type != CallType::Create && range.contains(trace.block_number) {
            *counts.entry(trace.from).or_insert(0) += 1;
        }
    }
    Ok(counts)
}

/// Addresses `proxy` delegatecalled into during `range`, most frequent first.
pub fn delegatecall_targets(
    chain: &dyn ChainSource,
    proxy: Address,
    range: ScanRange,
) -> Result<Vec<(Address, u64)>, ChainError> {
    let mut counts: BTreeMap<Address, u64> = BTreeMap::new();
    for trace in chain.calls_from(proxy, range)? {
        if trace.from == proxy && trace.call_type == CallType::DelegateCall && range.contains(trace.block_number) {
            *counts.entry(trace.to).or_insert(0) += 1;
        }
    }
    let mut out: Vec<_> = counts.into_iter().collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(out)
}

/// Contract iff the code at `block` is non-empty.
pub fn account_kind(chain: &dyn ChainSource, address: Address, block: u64) -> Result<AccountKind, ChainError> {
    Ok(AccountKind::from_code_len(chain.code_at(address, block)?.len()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContractMetadata {
    pub address: Address,
    pub abi_available: bool,
    pub abi_events: Vec<CanonicalSignature>,
    pub abi_functions: Vec<CanonicalSignature>,
    pub fetched_at: String,
    #[serde(skip)]
    pub abi: Option<AbiDocument>,
}

impl ContractMetadata {
    /// True when there is no ABI or the ABI declares nothing.
    pub fn is_empty(&self) -> bool {
        self.abi_events.is_empty() && self.abi_functions.is_empty()
    }
}

/// Verified-ABI lookup. A missing ABI is a value, a malformed one an error.
pub fn fetch_contract_metadata(chain: &dyn ChainSource, address: Address) -> Result<ContractMetadata, ChainError> {
    let fetched_at = chain.provenance();
    let Some(raw) = chain.contract_abi(address)? else {
        return Ok(ContractMetadata {
            address,
            abi_available: false,
            abi_events: Vec::new(),
            abi_functions: Vec::new(),
            fetched_at,
            abi: None,
        });
    };
    let parse_err = |source| ChainError::MetadataParse { address, source };
    let abi = AbiDocument::from_value(&raw).map_err(parse_err)?;
    Ok(ContractMetadata {
        address,
        abi_available: true,
        abi_events: abi.event_signatures().map_err(parse_err)?,
        abi_functions: abi.function_signatures().map_err(parse_err)?,
        fetched_at,
        abi: Some(abi),
    })
}

/// Logs of `emitter` in `range`, sorted by (block, tx, log index).
pub fn fetch_logs(
    chain: &dyn ChainSource,
    emitter: Address,
    range: ScanRange,
    topic0: Option<TopicHash>,
) -> Result<Vec<EventLogRecord>, ChainError> {
    let mut logs: Vec<EventLogRecord> = chain
        .logs(emitter, range, topic0)?
        .into_iter()
        .filter(|l| l.emitter == emitter && range.contains(l.block_number))
        .filter(|l| topic0.is_none() || l.topic0() == topic0)
        .collect();
    logs.sort_by_key(EventLogRecord::position);
    logs.dedup_by_key(|l| l.position());
    Ok(logs)
}
