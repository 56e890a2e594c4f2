//! Off-chain voting: Snapshot spaces, strategies, votes and proposal text.
//!
//! Spaces are indexed by every address found anywhere in their strategy
//! parameters. A voting-power contract resolves to the most-followed space
//! referencing it, provided that space has at least [`MIN_FOLLOWERS`].

mod graphql;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::chainio::{account_kind, ChainError, ChainSource, TransportError};
use crate::model::{AccountKind, Address};

pub use graphql::{GraphqlSnapshot, SnapshotResponder, DEFAULT_HUB_URL};

pub const MIN_FOLLOWERS: u64 = 50;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot source unavailable: {0}")]
    Unavailable(String),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("malformed snapshot data: {0}")]
    Malformed(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyRef {
    pub name: String,
    pub addresses: Vec<Address>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub followers: u64,
    pub strategies: Vec<StrategyRef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub treasuries: Vec<Address>,
}

impl SpaceRecord {
    /// Parses a space in the hub's GraphQL shape:
    /// `{id, name, followersCount, strategies: [{name, params}], treasuries: [{address}]}`.
    pub fn from_api(value: &Value) -> Result<Self, SnapshotError> {
        let malformed = |m: &str| SnapshotError::Malformed(format!("{m} in space {value}"));
        let id = value["id"].as_str().filter(|s| !s.is_empty()).ok_or_else(|| malformed("missing id"))?;
        let followers = match &value["followersCount"] {
            Value::Null => 0,
            v => v.as_u64().ok_or_else(|| malformed("bad followersCount"))?,
        };
        let strategies = match &value["strategies"] {
            Value::Null => Vec::new(),
            Value::Array(items) => items
                .iter()
                .map(|s| {
                    let mut found = BTreeSet::new();
                    collect_addresses(&s["params"], &mut found);
                    StrategyRef {
                        name: s["name"].as_str().unwrap_or_default().to_owned(),
                        addresses: found.into_iter().collect(),
                    }
                })
                .collect(),
            _ => return Err(malformed("strategies is not a list")),
        };
        let mut treasuries = BTreeSet::new();
        if let Value::Array(items) = &value["treasuries"] {
            for t in items {
                if let Some(a) = t["address"].as_str().and_then(|s| s.parse::<Address>().ok()) {
                    treasuries.insert(a);
                }
            }
        }
        Ok(SpaceRecord {
            id: id.to_owned(),
            name: value["name"].as_str().map(str::to_owned),
            followers,
            strategies,
            treasuries: treasuries.into_iter().collect(),
        })
    }

    pub fn referenced_addresses(&self) -> BTreeSet<Address> {
        self.strategies.iter().flat_map(|s| s.addresses.iter().copied()).collect()
    }
}

/// Walks a JSON document collecting every nonzero string value that parses
/// as an address, at any depth.
pub fn collect_addresses(value: &Value, out: &mut BTreeSet<Address>) {
    match value {
        Value::String(s) => {
            if let Ok(a) = s.trim().parse::<Address>() {
                if !a.is_zero() {
                    out.insert(a);
                }
            }
        }
        Value::Array(items) => items.iter().for_each(|v| collect_addresses(v, out)),
        Value::Object(map) => map.values().for_each(|v| collect_addresses(v, out)),
        _ => {}
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedSpace {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct SpaceIndex {
    spaces: BTreeMap<String, SpaceRecord>,
    by_address: BTreeMap<Address, BTreeSet<String>>,
    skipped: Vec<SkippedSpace>,
}

impl SpaceIndex {
    /// Number of distinct addresses referenced by any strategy.
    pub fn len(&self) -> usize {
        self.by_address.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_address.is_empty()
    }

    pub fn space_count(&self) -> usize {
        self.spaces.len()
    }

    pub fn space(&self, id: &str) -> Option<&SpaceRecord> {
        self.spaces.get(id)
    }

    pub fn spaces(&self) -> impl Iterator<Item = &SpaceRecord> {
        self.spaces.values()
    }

    /// Spaces whose strategies reference `address`, ordered by id.
    pub fn lookup(&self, address: Address) -> Vec<&SpaceRecord> {
        self.by_address.get(&address).into_iter().flatten().filter_map(|id| self.spaces.get(id)).collect()
    }

    /// Malformed or duplicate records left out of the index.
    pub fn skipped(&self) -> &[SkippedSpace] {
        &self.skipped
    }

    fn insert(&mut self, line: usize, space: SpaceRecord) {
        if self.spaces.contains_key(&space.id) {
            self.skipped.push(SkippedSpace { line, reason: format!("duplicate space id {}", space.id) });
            return;
        }
        for a in space.referenced_addresses() {
            self.by_address.entry(a).or_default().insert(space.id.clone());
        }
        self.spaces.insert(space.id.clone(), space);
    }
}

/// Indexes raw space documents. Malformed records and repeated ids are
/// skipped and reported; the first occurrence of an id wins.
pub fn build_space_index<'a, I>(raw: I) -> SpaceIndex
where
    I: IntoIterator<Item = &'a Value>,
{
    let mut index = SpaceIndex::default();
    for (i, value) in raw.into_iter().enumerate() {
        match SpaceRecord::from_api(value) {
            Ok(space) => index.insert(i + 1, space),
            Err(e) => index.skipped.push(SkippedSpace { line: i + 1, reason: e.to_string() }),
        }
    }
    index
}

/// The most-followed space referencing `address` with at least
/// `min_followers`; ties go to the smallest id.
pub fn resolve_space_with(index: &SpaceIndex, address: Address, min_followers: u64) -> Option<&SpaceRecord> {
    index
        .lookup(address)
        .into_iter()
        .filter(|s| s.followers >= min_followers)
        .max_by(|a, b| a.followers.cmp(&b.followers).then(b.id.cmp(&a.id)))
}

pub fn resolve_space(index: &SpaceIndex, address: Address) -> Option<&SpaceRecord> {
    resolve_space_with(index, address, MIN_FOLLOWERS)
}

/// A vote as delivered by the source, before account-kind resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawVote {
    pub id: String,
    pub space: String,
    pub proposal: String,
    pub voter: Address,
    pub choice: Value,
    pub vp: f64,
    pub created: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffchainVote {
    pub space_id: String,
    pub proposal_id: String,
    pub voter: Address,
    pub voter_kind: AccountKind,
    pub choice: Value,
    pub voting_power: f64,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposalText {
    pub id: String,
    pub space: String,
    pub title: String,
    #[serde(default)]
    pub body: String,
    #[serde(default)]
    pub created: u64,
}

pub trait SnapshotSource: Send + Sync {
    fn spaces(&self) -> Result<Vec<Value>, SnapshotError>;
    fn votes(&self, space_id: &str) -> Result<Vec<RawVote>, SnapshotError>;
    fn proposals(&self, space_id: &str) -> Result<Vec<ProposalText>, SnapshotError>;
}

pub fn load_space_index(source: &dyn SnapshotSource) -> Result<SpaceIndex, SnapshotError> {
    Ok(build_space_index(&source.spaces()?))
}

/// All votes of `space_id`, one per (proposal, voter) with the latest row
/// winning, sorted by (timestamp, proposal, voter). Voter kinds are read at
/// `block`.
pub fn fetch_offchain_votes(
    source: &dyn SnapshotSource,
    space_id: &str,
    chain: &dyn ChainSource,
    block: u64,
) -> Result<Vec<OffchainVote>, SnapshotError> {
    let mut latest: BTreeMap<(String, Address), RawVote> = BTreeMap::new();
    for vote in source.votes(space_id)?.into_iter().filter(|v| v.space == space_id) {
        let key = (vote.proposal.clone(), vote.voter);
        match latest.get(&key) {
            Some(prev) if prev.created > vote.created => {}
            _ => {
                latest.insert(key, vote);
            }
        }
    }
    let mut kinds: BTreeMap<Address, AccountKind> = BTreeMap::new();
    let mut out = Vec::with_capacity(latest.len());
    for ((proposal_id, voter), raw) in latest {
        let voter_kind = match kinds.get(&voter) {
            Some(k) => *k,
            None => {
                let k = account_kind(chain, voter, block)?;
                kinds.insert(voter, k);
                k
            }
        };
        out.push(OffchainVote {
            space_id: space_id.to_owned(),
            proposal_id,
            voter,
            voter_kind,
            choice: raw.choice,
            voting_power: raw.vp,
            timestamp: raw.created,
        });
    }
    out.sort_by(|a, b| (a.timestamp, &a.proposal_id, a.voter).cmp(&(b.timestamp, &b.proposal_id, b.voter)));
    Ok(out)
}

pub fn contract_votes(votes: &[OffchainVote]) -> Vec<OffchainVote> {
    votes.iter().filter(|v| v.voter_kind.is_contract()).cloned().collect()
}

/// Snapshot data held in memory, loadable from `spaces.jsonl`,
/// `votes.jsonl` and `proposals.jsonl`. Missing files are empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SnapshotFixture {
    pub spaces: Vec<Value>,
    pub votes: Vec<RawVote>,
    pub proposals: Vec<ProposalText>,
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, SnapshotError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for (i, line) in BufReader::new(fs::File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| SnapshotError::Malformed(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<(), SnapshotError> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut f, item).map_err(|e| SnapshotError::Malformed(e.to_string()))?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

impl SnapshotFixture {
    pub fn load(dir: &Path) -> Result<Self, SnapshotError> {
        Ok(SnapshotFixture {
            spaces: read_lines(&dir.join("spaces.jsonl"))?,
            votes: read_lines(&dir.join("votes.jsonl"))?,
            proposals: read_lines(&dir.join("proposals.jsonl"))?,
        })
    }

    pub fn write_dir(&self, dir: &Path) -> Result<(), SnapshotError> {
        fs::create_dir_all(dir)?;
        write_lines(&dir.join("spaces.jsonl"), &self.spaces)?;
        write_lines(&dir.join("votes.jsonl"), &self.votes)?;
        write_lines(&dir.join("proposals.jsonl"), &self.proposals)
    }

    /// Adds a space whose single strategy references `addresses`.
    pub fn add_space(&mut self, id: &str, followers: u64, addresses: &[Address]) {
        let params: Vec<Value> = addresses.iter().map(|a| Value::String(a.to_string())).collect();
        self.spaces.push(serde_json::json!({
            "id": id,
            "followersCount": followers,
            "strategies": [{ "name": "erc20-balance-of", "params": { "addresses": params } }],
        }));
    }

    pub fn add_vote(&mut self, space: &str, proposal: &str, voter: Address, choice: Value, vp: f64, created: u64) {
        let id = format!("{space}/{proposal}/{voter}/{created}");
        self.votes.push(RawVote { id, space: space.into(), proposal: proposal.into(), voter, choice, vp, created });
    }

    pub fn add_proposal(&mut self, space: &str, id: &str, title: &str, body: &str) {
        let created = self.proposals.len() as u64;
        self.proposals.push(ProposalText {
            id: id.into(),
            space: space.into(),
            title: title.into(),
            body: body.into(),
            created,
        });
    }
}

impl SnapshotSource for SnapshotFixture {
    fn spaces(&self) -> Result<Vec<Value>, SnapshotError> {
        Ok(self.spaces.clone())
    }

    fn votes(&self, space_id: &str) -> Result<Vec<RawVote>, SnapshotError> {
        Ok(self.votes.iter().filter(|v| v.space == space_id).cloned().collect())
    }

    fn proposals(&self, space_id: &str) -> Result<Vec<ProposalText>, SnapshotError> {
        let mut out: Vec<ProposalText> = self.proposals.iter().filter(|p| p.space == space_id).cloned().collect();
        out.sort_by(|a, b| (a.created, &a.id).cmp(&(b.created, &b.id)));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chainio::FixtureChain;
    use serde_json::json;

    fn addr(n: u64) -> Address {
        Address::from_low_u64(n)
    }

    #[test]
    fn strategy_addresses_found_at_any_depth() {
        let space = json!({
            "id": "deep.eth",
            "followersCount": 7,
            "strategies": [
                { "name": "multi", "params": { "symbol": "X", "nested": { "list": [{ "address": addr(5).to_string() }, "0xnot-an-address"] }, "token": addr(6).to_string() } },
                { "name": "zero", "params": { "address": Address::ZERO.to_string() } }
            ],
            "treasuries": [{ "name": "main", "address": addr(9).to_string(), "network": "1" }]
        });
        let rec = SpaceRecord::from_api(&space).unwrap();
        assert_eq!(rec.strategies[0].addresses, vec![addr(5), addr(6)]);
        assert!(rec.strategies[1].addresses.is_empty());
        assert_eq!(rec.treasuries, vec![addr(9)]);
    }

    #[test]
    fn index_lookup_and_report() {
        let mut fx = SnapshotFixture::default();
        assert!(build_space_index(&fx.spaces).is_empty());
        fx.add_space("a.eth", 100, &[addr(1), addr(2)]);
        fx.add_space("b.eth", 60, &[addr(1)]);
        fx.add_space("a.eth", 1, &[addr(3)]);
        fx.spaces.push(json!({ "followersCount": 3 }));
        let index = build_space_index(&fx.spaces);
        let ids: Vec<&str> = index.lookup(addr(1)).iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["a.eth", "b.eth"]);
        assert!(index.lookup(addr(3)).is_empty());
        assert!(index.lookup(addr(77)).is_empty());
        assert_eq!(index.len(), 2);
        assert_eq!(index.skipped().len(), 2);
    }

    #[test]
    fn follower_threshold_and_ties() {
        let t = addr(1);
        let mut fx = SnapshotFixture::default();
        fx.add_space("big.eth", 10_000, &[t]);
        fx.add_space("small.eth", 49, &[t]);
        let index = build_space_index(&fx.spaces);
        assert_eq!(resolve_space(&index, t).unwrap().id, "big.eth");

        let mut fx = SnapshotFixture::default();
        fx.add_space("x.eth", 49, &[t]);
        assert!(resolve_space(&build_space_index(&fx.spaces), t).is_none());
        fx.add_space("y.eth", 50, &[t]);
        assert_eq!(resolve_space(&build_space_index(&fx.spaces), t).unwrap().id, "y.eth");
        fx.add_space("w.eth", 50, &[t]);
        assert_eq!(resolve_space(&build_space_index(&fx.spaces), t).unwrap().id, "w.eth");
    }

    #[test]
    fn votes_deduplicate_and_annotate() {
        let safe = addr(20);
        let mut chain = FixtureChain::new();
        chain.add_contract(safe);
        let mut fx = SnapshotFixture::default();
        fx.add_vote("s.eth", "p1", addr(10), json!(1), 5.0, 100);
        fx.add_vote("s.eth", "p1", addr(10), json!(2), 5.0, 200);
        fx.add_vote("s.eth", "p1", safe, json!(1), 1.5, 150);
        fx.add_vote("other.eth", "p9", safe, json!(1), 1.0, 150);
        let votes = fetch_offchain_votes(&fx, "s.eth", &chain, 1_000).unwrap();
        assert_eq!(votes.len(), 2);
        let eoa = votes.iter().find(|v| v.voter == addr(10)).unwrap();
        assert_eq!(eoa.choice, json!(2));
        let contract = contract_votes(&votes);
        assert_eq!(contract.len(), 1);
        assert_eq!(contract_votes(&contract), contract);
        assert!(fetch_offchain_votes(&fx, "none.eth", &chain, 1_000).unwrap().is_empty());
    }

    #[test]
    fn fixture_round_trips_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut fx = SnapshotFixture::default();
        fx.add_space("a.eth", 51, &[addr(1)]);
        fx.add_vote("a.eth", "p", addr(2), json!([1, 2]), 0.25, 9);
        fx.add_proposal("a.eth", "p", "Fund Aave", "body");
        fx.write_dir(dir.path()).unwrap();
        assert_eq!(SnapshotFixture::load(dir.path()).unwrap(), fx);
    }
}
