//! Governance-contract identification: starting from a voting-power
//! contract, find the contract that wields its power.
//!
//! 1. Collect every caller of the input contract from traces.
//! 2. Keep callers with a verified ABI whose hashed signatures carry a
//!    governance keyword.
//! 3. Choose the candidate that called the input most often.
//!
//! Proxies whose own ABI is empty are classified through the
//! implementation they delegatecall into. Equal call counts are broken by
//! the lowest address.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::chainio::{
    contract_invocators, delegatecall_targets, fetch_contract_metadata, ChainError, ChainSource, ContractMetadata,
    ScanRange,
};
use crate::model::Address;
use crate::sigstore::{matched_governance_keywords, KeywordPolicy, SignatureEntry, SignatureKind, SignatureStore};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Candidate {
    pub address: Address,
    pub invocation_count: u64,
    pub matched_keywords: Vec<String>,
    /// The implementation whose ABI was used, when `address` is a proxy.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub implementation: Option<Address>,
}

/// One decision taken while scanning, in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Evidence {
    Invocator { address: Address, count: u64 },
    ExcludedInput { address: Address, count: u64 },
    NoAbi { address: Address },
    UnreadableAbi { address: Address, error: String },
    ProxyImplementation { proxy: Address, implementation: Address },
    NotGovernance { address: Address },
    Governance { address: Address, keywords: Vec<String> },
    TieBreak { count: u64, tied: Vec<Address>, chosen: Address },
    Chosen { address: Address, count: u64 },
    NoCandidates,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GovernanceDetection {
    pub input: Address,
    pub range: ScanRange,
    pub candidates: Vec<Candidate>,
    pub chosen: Option<Address>,
    pub evidence: Vec<Evidence>,
}

impl GovernanceDetection {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("detection serializes")
    }
}

/// Builds the signature entries used for classification: every ABI event
/// and function, plus any store entries sharing their hashes.
pub fn abi_entries(meta: &ContractMetadata, store: &SignatureStore) -> Vec<SignatureEntry> {
    let source = meta.fetched_at.as_str();
    let mut entries = Vec::new();
    for sig in &meta.abi_events {
        let entry = SignatureEntry::new(sig.clone(), SignatureKind::Event, source);
        entries
            .extend(store.lookup_topic(&entry.topic).into_iter().filter(|e| e.kind == SignatureKind::Event).cloned());
        entries.push(entry);
    }
    for sig in &meta.abi_functions {
        let entry = SignatureEntry::new(sig.clone(), SignatureKind::Function, source);
        entries.extend(store.lookup_selector(entry.selector()).into_iter().cloned());
        entries.push(entry);
    }
    entries
}

pub struct GovernanceScanner<'a> {
    chain: &'a dyn ChainSource,
    store: &'a SignatureStore,
    policy: &'a KeywordPolicy,
    resolve_proxies: bool,
}

impl<'a> GovernanceScanner<'a> {
    pub fn new(chain: &'a dyn ChainSource, store: &'a SignatureStore, policy: &'a KeywordPolicy) -> Self {
        GovernanceScanner { chain, store, policy, resolve_proxies: true }
    }

    pub fn resolve_proxies(mut self, on: bool) -> Self {
        self.resolve_proxies = on;
        self
    }

    fn metadata(&self, address: Address, evidence: &mut Vec<Evidence>) -> Result<Option<ContractMetadata>, ChainError> {
        match fetch_contract_metadata(self.chain, address) {
            Ok(meta) => Ok(Some(meta)),
            Err(ChainError::MetadataParse { address, source }) => {
                evidence.push(Evidence::UnreadableAbi { address, error: source.to_string() });
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }

    /// The ABI to classify `address` by, following one proxy hop if needed.
    fn classification_abi(
        &self,
        address: Address,
        range: ScanRange,
        evidence: &mut Vec<Evidence>,
    ) -> Result<Option<(ContractMetadata, Option<Address>)>, ChainError> {
        let own = self.metadata(address, evidence)?;
        if let Some(meta) = &own {
            if meta.abi_available && !meta.is_empty() {
                return Ok(own.map(|m| (m, None)));
            }
        }
        if self.resolve_proxies {
            for (implementation, _) in delegatecall_targets(self.chain, address, range)? {
                if let Some(meta) = self.metadata(implementation, evidence)? {
                    if meta.abi_available && !meta.is_empty() {
                        evidence.push(Evidence::ProxyImplementation { proxy: address, implementation });
                        return Ok(Some((meta, Some(implementation))));
                    }
                }
            }
        }
        Ok(own.filter(|m| m.abi_available).map(|m| (m, None)))
    }

    pub fn identify(&self, input: Address, range: ScanRange) -> Result<GovernanceDetection, ChainError> {
        let invocators: BTreeMap<Address, u64> = contract_invocators(self.chain, input, range)?;
        let mut evidence = Vec::new();
        let mut candidates = Vec::new();

        for (&address, &count) in &invocators {
            if address == input {
                evidence.push(Evidence::ExcludedInput { address, count });
                continue;
            }
            evidence.push(Evidence::Invocator { address, count });
            let Some((meta, implementation)) = self.classification_abi(address, range, &mut evidence)? else {
                evidence.push(Evidence::NoAbi { address });
                continue;
            };
            let keywords = matched_governance_keywords(&abi_entries(&meta, self.store), self.policy);
            if keywords.is_empty() {
                evidence.push(Evidence::NotGovernance { address });
                continue;
            }
            evidence.push(Evidence::Governance { address, keywords: keywords.clone() });
            candidates.push(Candidate { address, invocation_count: count, matched_keywords: keywords, implementation });
        }

        let chosen = most_frequently_invoking(&candidates, &mut evidence);
        Ok(GovernanceDetection { input, range, candidates, chosen, evidence })
    }
}

/// Argmax by invocation count; ties go to the lowest address.
fn most_frequently_invoking(candidates: &[Candidate], evidence: &mut Vec<Evidence>) -> Option<Address> {
    let Some(best) = candidates.iter().map(|c| c.invocation_count).max() else {
        evidence.push(Evidence::NoCandidates);
        return None;
    };
    let mut tied: Vec<Address> = candidates.iter().filter(|c| c.invocation_count == best).map(|c| c.address).collect();
    tied.sort();
    let chosen = tied[0];
    if tied.len() > 1 {
        evidence.push(Evidence::TieBreak { count: best, tied, chosen });
    }
    evidence.push(Evidence::Chosen { address: chosen, count: best });
    Some(chosen)
}

/// Convenience wrapper using a built-in signature store and default keywords.
pub fn identify_governance_contract(
    chain: &dyn ChainSource,
    input: Address,
    range: ScanRange,
) -> Result<GovernanceDetection, ChainError> {
    let store = SignatureStore::with_builtin();
    let policy = KeywordPolicy::default();
    GovernanceScanner::new(chain, &store, &policy).identify(input, range)
}
