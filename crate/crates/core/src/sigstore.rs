//! Local database of known event and function signatures, with keyword
//! classification for governance and delegation.
//!
//! Dumps are plain text, one canonical signature per line; blank lines and
//! lines starting with `#` are ignored. The persisted store is a single
//! sorted file of `kind<TAB>canonical<TAB>source` lines.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{self, BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CanonicalSignature, TopicHash};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignatureKind {
    Event,
    Function,
}

impl fmt::Display for SignatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SignatureKind::Event => "event",
            SignatureKind::Function => "function",
        })
    }
}

impl FromStr for SignatureKind {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "event" => Ok(SignatureKind::Event),
            "function" => Ok(SignatureKind::Function),
            other => Err(StoreError::Format(format!("unknown kind {other:?}"))),
        }
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("store format: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignatureEntry {
    pub canonical: CanonicalSignature,
    /// Full keccak digest. Functions are keyed by its first four bytes.
    pub topic: TopicHash,
    pub kind: SignatureKind,
    pub source: String,
}

impl SignatureEntry {
    pub fn new(canonical: CanonicalSignature, kind: SignatureKind, source: &str) -> Self {
        SignatureEntry { topic: canonical.topic_hash(), canonical, kind, source: source.to_owned() }
    }

    pub fn selector(&self) -> [u8; 4] {
        self.topic.selector()
    }

    pub fn name(&self) -> &str {
        self.canonical.name()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordPolicy {
    pub governance: BTreeSet<String>,
    pub delegation: BTreeSet<String>,
}

impl Default for KeywordPolicy {
    fn default() -> Self {
        KeywordPolicy {
            governance: ["vote", "proposal"].into_iter().map(String::from).collect(),
            delegation: ["delegate"].into_iter().map(String::from).collect(),
        }
    }
}

impl KeywordPolicy {
    /// Keywords are lowercased; empty keywords are dropped.
    pub fn new<I, J, S, T>(governance: I, delegation: J) -> Self
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let norm = |s: &str| {
            let s = s.trim().to_lowercase();
            (!s.is_empty()).then_some(s)
        };
        KeywordPolicy {
            governance: governance.into_iter().filter_map(|s| norm(s.as_ref())).collect(),
            delegation: delegation.into_iter().filter_map(|s| norm(s.as_ref())).collect(),
        }
    }

    /// Governance keywords found in `name`, case-insensitively.
    pub fn governance_matches(&self, name: &str) -> Vec<String> {
        let lower = name.to_lowercase();
        self.governance.iter().filter(|k| lower.contains(k.as_str())).cloned().collect()
    }

    pub fn is_delegation_name(&self, name: &str) -> bool {
        let lower = name.to_lowercase();
        self.delegation.iter().any(|k| lower.contains(k.as_str()))
    }
}

/// True iff some entry's name contains a governance keyword. Events and
/// functions both count.
pub fn classify_governance(entries: &[SignatureEntry], policy: &KeywordPolicy) -> bool {
    entries.iter().any(|e| !policy.governance_matches(e.name()).is_empty())
}

/// Governance keywords matched by any entry, sorted and deduplicated.
pub fn matched_governance_keywords(entries: &[SignatureEntry], policy: &KeywordPolicy) -> Vec<String> {
    let set: BTreeSet<String> = entries.iter().flat_map(|e| policy.governance_matches(e.name())).collect();
    set.into_iter().collect()
}

/// All event entries whose name matches a delegation keyword, ordered by
/// canonical text.
pub fn find_delegation_signatures(entries: &[SignatureEntry], policy: &KeywordPolicy) -> Vec<SignatureEntry> {
    let mut found: Vec<SignatureEntry> = entries
        .iter()
        .filter(|e| e.kind == SignatureKind::Event && policy.is_delegation_name(e.name()))
        .cloned()
        .collect();
    found.sort_by(|a, b| a.canonical.canonical().cmp(&b.canonical.canonical()).then(a.source.cmp(&b.source)));
    found.dedup_by(|a, b| a.canonical == b.canonical);
    found
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestFailure {
    pub line: usize,
    pub text: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IngestReport {
    pub added: usize,
    pub failures: Vec<IngestFailure>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SignatureStore {
    entries: BTreeMap<(String, SignatureKind), SignatureEntry>,
    by_topic: BTreeMap<TopicHash, BTreeSet<(String, SignatureKind)>>,
}

impl SignatureStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inserts unless `(canonical, kind)` is already present. Returns
    /// whether the entry was new.
    pub fn insert(&mut self, entry: SignatureEntry) -> bool {
        let key = (entry.canonical.canonical(), entry.kind);
        if self.entries.contains_key(&key) {
            return false;
        }
        self.by_topic.entry(entry.topic).or_default().insert(key.clone());
        self.entries.insert(key, entry);
        true
    }

    pub fn ingest_dump<I, S>(&mut self, lines: I, kind: SignatureKind, source: &str) -> IngestReport
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut report = IngestReport::default();
        for (i, line) in lines.into_iter().enumerate() {
            let text = line.as_ref().trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            match text.parse::<CanonicalSignature>() {
                Ok(sig) => {
                    if self.insert(SignatureEntry::new(sig, kind, source)) {
                        report.added += 1;
                    }
                }
                Err(e) => {
                    report.failures.push(IngestFailure { line: i + 1, text: text.to_owned(), reason: e.to_string() })
                }
            }
        }
        report
    }

    pub fn ingest_file(&mut self, path: &Path, kind: SignatureKind) -> Result<IngestReport, StoreError> {
        let text = std::fs::read_to_string(path)?;
        let source = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        Ok(self.ingest_dump(text.lines(), kind, &source))
    }

    /// Entries whose topic equals `topic`.
    pub fn lookup_topic(&self, topic: &TopicHash) -> Vec<&SignatureEntry> {
        self.by_topic.get(topic).into_iter().flatten().filter_map(|key| self.entries.get(key)).collect()
    }

    /// Function entries whose selector equals `selector`.
    pub fn lookup_selector(&self, selector: [u8; 4]) -> Vec<&SignatureEntry> {
        let lo = TopicHash::new({
            let mut b = [0u8; 32];
            b[..4].copy_from_slice(&selector);
            b
        });
        let hi = TopicHash::new({
            let mut b = [0xffu8; 32];
            b[..4].copy_from_slice(&selector);
            b
        });
        self.by_topic
            .range(lo..=hi)
            .flat_map(|(_, keys)| keys)
            .filter_map(|key| self.entries.get(key))
            .filter(|e| e.kind == SignatureKind::Function)
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SignatureEntry> {
        self.entries.values()
    }

    pub fn save<W: Write>(&self, mut out: W) -> Result<(), StoreError> {
        // entries are keyed by (canonical, kind), so iteration is sorted
        for e in self.entries.values() {
            writeln!(out, "{}\t{}\t{}", e.kind, e.canonical, e.source)?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(input: R) -> Result<Self, StoreError> {
        let mut store = SignatureStore::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.splitn(3, '\t');
            let (Some(kind), Some(canonical), Some(source)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(StoreError::Format(format!("line {}: expected three fields", i + 1)));
            };
            let sig: CanonicalSignature =
                canonical.parse().map_err(|e| StoreError::Format(format!("line {}: {e}", i + 1)))?;
            store.insert(SignatureEntry::new(sig, kind.parse()?, source));
        }
        Ok(store)
    }

    pub fn save_file(&self, path: &Path) -> Result<(), StoreError> {
        let mut buf = Vec::new();
        self.save(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load_file(path: &Path) -> Result<Self, StoreError> {
        let file = std::fs::File::open(path)?;
        Self::load(io::BufReader::new(file))
    }

    /// A small built-in set of common governance, delegation and token
    /// signatures.
    pub fn with_builtin() -> Self {
        let mut store = SignatureStore::new();
        store.ingest_dump(BUILTIN_EVENTS.lines(), SignatureKind::Event, "builtin");
        store.ingest_dump(BUILTIN_FUNCTIONS.lines(), SignatureKind::Function, "builtin");
        store
    }
}

const BUILTIN_EVENTS: &str = "\
Transfer(address,address,uint256)
Approval(address,address,uint256)
VoteCast(address,uint256,uint8,uint256,string)
VoteCastWithParams(address,uint256,uint8,uint256,string,bytes)
VoteEmitted(uint256,address,bool,uint256)
ProposalCreated(uint256,address,address[],uint256[],string[],bytes[],uint256,uint256,string)
ProposalCanceled(uint256)
ProposalQueued(uint256,uint256)
ProposalExecuted(uint256)
DelegateChanged(address,address,address)
DelegateVotesChanged(address,uint256,uint256)
DelegateChanged(address,address,uint8)
DelegatedPowerChanged(address,uint256,uint8)
";

const BUILTIN_FUNCTIONS: &str = "\
balanceOf(address)
getVotes(address)
getPriorVotes(address,uint256)
castVote(uint256,uint8)
castVoteWithReason(uint256,uint8,string)
submitVote(uint256,bool)
propose(address[],uint256[],string[],bytes[],string)
delegate(address)
delegateBySig(address,uint256,uint256,uint8,bytes32,bytes32)
";

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(text: &str, kind: SignatureKind) -> SignatureEntry {
        SignatureEntry::new(text.parse().unwrap(), kind, "test")
    }

    fn ev(text: &str) -> SignatureEntry {
        entry(text, SignatureKind::Event)
    }

    #[test]
    fn ingest_dedups() {
        let mut store = SignatureStore::new();
        let report = store.ingest_dump(["Transfer(address,address,uint256)"; 2], SignatureKind::Event, "d");
        assert_eq!(report.added, 1);
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn ingest_reports_malformed_lines() {
        let mut store = SignatureStore::new();
        let lines = ["# header", "A(address)", "B(uint256)", "not a sig", "", "C(bool,bytes)"];
        let report = store.ingest_dump(lines, SignatureKind::Event, "d");
        assert_eq!(report.added, 3);
        assert_eq!(report.failures.len(), 1);
        assert_eq!(report.failures[0].line, 4);
    }

    #[test]
    fn same_text_different_kind_are_distinct() {
        let mut store = SignatureStore::new();
        assert!(store.insert(entry("vote(uint256)", SignatureKind::Event)));
        assert!(store.insert(entry("vote(uint256)", SignatureKind::Function)));
        assert_eq!(store.len(), 2);
    }

    #[test]
    fn classification_examples() {
        let policy = KeywordPolicy::default();
        assert!(classify_governance(&[ev("VoteCast(address,uint256,uint8,uint256,string)")], &policy));
        assert!(!classify_governance(
            &[ev("Transfer(address,address,uint256)"), ev("Approval(address,address,uint256)")],
            &policy
        ));
        assert!(classify_governance(
            &[ev("ProposalCreated(uint256)"), ev("Transfer(address,address,uint256)")],
            &policy
        ));
        assert!(classify_governance(&[entry("castVote(uint256,uint8)", SignatureKind::Function)], &policy));
        assert!(!classify_governance(&[], &policy));
    }

    #[test]
    fn keyword_matching_ignores_parameter_types() {
        let policy = KeywordPolicy::new(["uint"], ["delegate"]);
        assert!(!classify_governance(&[ev("Transfer(address,address,uint256)")], &policy));
    }

    #[test]
    fn delegation_examples() {
        let policy = KeywordPolicy::default();
        let found = find_delegation_signatures(
            &[
                ev("DelegateVotesChanged(address,uint256,uint256)"),
                ev("Transfer(address,address,uint256)"),
                ev("DelegateChanged(address,address,address)"),
                entry("delegate(address)", SignatureKind::Function),
            ],
            &policy,
        );
        let names: Vec<_> = found.iter().map(|e| e.canonical.canonical()).collect();
        assert_eq!(
            names,
            ["DelegateChanged(address,address,address)", "DelegateVotesChanged(address,uint256,uint256)"]
        );
        assert!(find_delegation_signatures(&[ev("Transfer(address,address,uint256)")], &policy).is_empty());
        assert_eq!(find_delegation_signatures(&[ev("DELEGATEMoved(address)")], &policy).len(), 1);
    }

    #[test]
    fn selector_lookup() {
        let store = SignatureStore::with_builtin();
        let hits = store.lookup_selector([0x70, 0xa0, 0x82, 0x31]);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].canonical.canonical(), "balanceOf(address)");
    }

    #[test]
    fn save_load_is_bit_exact() {
        let store = SignatureStore::with_builtin();
        let mut first = Vec::new();
        store.save(&mut first).unwrap();
        let loaded = SignatureStore::load(first.as_slice()).unwrap();
        assert_eq!(loaded, store);
        let mut second = Vec::new();
        loaded.save(&mut second).unwrap();
        assert_eq!(first, second);
    }
}
