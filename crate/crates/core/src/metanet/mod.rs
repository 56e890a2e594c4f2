//! The metagovernance network: DAOs as vertices, influence as directed
//! edges, with the records behind each edge kept as evidence.

mod export;
mod report;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chainio::ScanRange;
use crate::labeler::{tag_display_name, LabelRecord};
use crate::model::{Address, DaoIdentity};
use crate::snapshotio::OffchainVote;
use crate::voterscan::{DelegationRecord, VoteRecord};

pub use export::{export, parse_json, ExportFormat};
pub use report::{
    decisive_report, degree_report, mention_report, proposal_shares, share_report, DecisiveReport, DegreeRow,
    MentionRow, MentionTarget, Outcome, QuorumMajority, ShareReport, ShareRow, Side, SimpleMajority, SkippedProposal,
    Tally, ThresholdRule, VoterImpact, SHARE_FLAG_THRESHOLD,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetworkError {
    #[error("edge {0} -> {1} is a self-loop")]
    SelfLoop(String, String),
    #[error("edge {source_id} -> {target} ({kind:?}) has no evidence")]
    NoEvidence { source_id: String, target: String, kind: EdgeKind },
    #[error("edge endpoint {0} is not a vertex")]
    MissingVertex(String),
    #[error("malformed network document: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    OnChainVote,
    OffChainVote,
    Delegation,
}

/// A pointer to the record that justified an edge.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum EvidenceRef {
    Vote { governor: Address, voter: Address, proposal_id: Option<String>, block: u64, tx: u64, log: u64 },
    OffchainVote { space: String, proposal_id: String, voter: Address, timestamp: u64 },
    Delegation { token: Address, delegator: Address, delegate: Address, block: u64, tx: u64, log: u64 },
}

impl EvidenceRef {
    pub fn of_vote(v: &VoteRecord) -> Self {
        EvidenceRef::Vote {
            governor: v.governor,
            voter: v.voter,
            proposal_id: v.proposal_id.clone(),
            block: v.block_number,
            tx: v.tx_index,
            log: v.log_index,
        }
    }

    pub fn of_offchain(v: &OffchainVote) -> Self {
        EvidenceRef::OffchainVote {
            space: v.space_id.clone(),
            proposal_id: v.proposal_id.clone(),
            voter: v.voter,
            timestamp: v.timestamp,
        }
    }

    pub fn of_delegation(d: &DelegationRecord) -> Self {
        EvidenceRef::Delegation {
            token: d.token,
            delegator: d.delegator,
            delegate: d.delegate,
            block: d.block_number,
            tx: d.tx_index,
            log: d.log_index,
        }
    }

    /// Block number for chain records, seconds for off-chain votes.
    pub fn when(&self) -> u64 {
        match self {
            EvidenceRef::Vote { block, .. } | EvidenceRef::Delegation { block, .. } => *block,
            EvidenceRef::OffchainVote { timestamp, .. } => *timestamp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetagovEdge {
    pub source: String,
    pub target: String,
    pub kind: EdgeKind,
    /// Sorted and deduplicated.
    pub evidence: Vec<EvidenceRef>,
    /// Earliest evidence: a block for chain kinds, a timestamp off-chain.
    pub first_seen: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub scan_range: Option<ScanRange>,
    /// SHA-256 of the canonical seed list.
    pub seed_hash: Option<String>,
    pub expansion_depth: u32,
}

/// Counts at each stage of turning delegation records into edges.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelegationFunnel {
    pub total: u64,
    pub self_delegations: u64,
    pub labelled_addresses: u64,
    pub distinct_dao_pairs: u64,
    pub active: u64,
    pub new_edges: u64,
}

impl DelegationFunnel {
    pub fn non_self(&self) -> u64 {
        self.total - self.self_delegations
    }

    /// Stage counts never grow along the funnel.
    pub fn is_monotone(&self) -> bool {
        self.total >= self.self_delegations
            && self.non_self() >= self.distinct_dao_pairs
            && self.distinct_dao_pairs >= self.active
            && self.active >= self.new_edges
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MetagovNetwork {
    vertices: BTreeMap<String, DaoIdentity>,
    edges: BTreeMap<(String, String, EdgeKind), MetagovEdge>,
    pub provenance: Provenance,
    /// DAOs whose governance has been scanned.
    pub scanned: BTreeSet<String>,
    /// DAOs visited by expansion that could not be scanned.
    pub leaves: BTreeSet<String>,
    pub funnel: Option<DelegationFunnel>,
}

/// Everything learned about one DAO in one scan.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DaoScan {
    pub dao: Option<DaoIdentity>,
    pub votes: Vec<VoteRecord>,
    pub offchain_votes: Vec<OffchainVote>,
    pub delegations: Vec<DelegationRecord>,
    /// Labels for every voter and delegation party seen.
    pub labels: Vec<LabelRecord>,
    pub notes: Vec<String>,
}

/// The vertex id for an address: its label's DAO id, else the address.
pub fn vertex_for(address: Address, labels: &BTreeMap<Address, LabelRecord>) -> DaoIdentity {
    match labels.get(&address) {
        Some(l) if l.dao_id.is_some() => {
            let id = l.dao_id.clone().expect("checked");
            let name = l.tag.as_deref().map(tag_display_name).filter(|n| !n.is_empty()).unwrap_or_else(|| id.clone());
            DaoIdentity::inferred(&id, &name)
        }
        _ => DaoIdentity::inferred(&address.to_string(), &address.to_string()),
    }
}

pub fn seed_hash(seed: &[DaoIdentity]) -> String {
    let mut sorted: Vec<&DaoIdentity> = seed.iter().collect();
    sorted.sort();
    let canonical = serde_json::to_vec(&sorted).expect("identities serialize");
    hex::encode(Sha256::digest(canonical))
}

impl MetagovNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertices(&self) -> impl Iterator<Item = &DaoIdentity> {
        self.vertices.values()
    }

    pub fn vertex(&self, id: &str) -> Option<&DaoIdentity> {
        self.vertices.get(id)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Edges ordered by (source, target, kind).
    pub fn edges(&self) -> impl Iterator<Item = &MetagovEdge> {
        self.edges.values()
    }

    pub fn edge(&self, source: &str, target: &str, kind: EdgeKind) -> Option<&MetagovEdge> {
        self.edges.get(&(source.to_owned(), target.to_owned(), kind))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Inserts or upgrades a vertex. A more authoritative source replaces
    /// the existing identity; otherwise missing handles are filled in.
    pub fn add_vertex(&mut self, dao: DaoIdentity) {
        match self.vertices.get_mut(&dao.id) {
            None => {
                self.vertices.insert(dao.id.clone(), dao);
            }
            Some(existing) if dao.source < existing.source => *existing = dao,
            Some(existing) => {
                existing.voting_power_address = existing.voting_power_address.or(dao.voting_power_address);
                existing.governor_address = existing.governor_address.or(dao.governor_address);
                if existing.snapshot_space.is_none() {
                    existing.snapshot_space = dao.snapshot_space;
                }
            }
        }
    }

    /// Adds evidence to the (source, target, kind) edge, creating it and
    /// any missing endpoint vertices. Returns true if the edge is new.
    pub fn add_edge(
        &mut self,
        source: DaoIdentity,
        target: DaoIdentity,
        kind: EdgeKind,
        evidence: Vec<EvidenceRef>,
    ) -> Result<bool, NetworkError> {
        if source.id == target.id {
            return Err(NetworkError::SelfLoop(source.id, target.id));
        }
        if evidence.is_empty() {
            return Err(NetworkError::NoEvidence { source_id: source.id, target: target.id, kind });
        }
        let key = (source.id.clone(), target.id.clone(), kind);
        self.add_vertex(source);
        self.add_vertex(target);
        let first = evidence.iter().map(EvidenceRef::when).min().expect("non-empty");
        let is_new = !self.edges.contains_key(&key);
        let edge = self.edges.entry(key.clone()).or_insert_with(|| MetagovEdge {
            source: key.0,
            target: key.1,
            kind,
            evidence: Vec::new(),
            first_seen: first,
        });
        edge.evidence.extend(evidence);
        edge.evidence.sort();
        edge.evidence.dedup();
        edge.first_seen = edge.first_seen.min(first);
        Ok(is_new)
    }

    /// Folds one DAO's scan in: the DAO becomes a scanned vertex and every
    /// contract-account vote on it becomes evidence on an edge into it.
    pub fn absorb(&mut self, scan: &DaoScan) {
        let Some(target) = scan.dao.clone() else { return };
        self.add_vertex(target.clone());
        self.scanned.insert(target.id.clone());
        self.leaves.remove(&target.id);
        let labels: BTreeMap<Address, LabelRecord> = scan.labels.iter().map(|l| (l.address, l.clone())).collect();

        for v in scan.votes.iter().filter(|v| v.voter_kind.is_contract()) {
            let _ = self.add_edge(
                vertex_for(v.voter, &labels),
                target.clone(),
                EdgeKind::OnChainVote,
                vec![EvidenceRef::of_vote(v)],
            );
        }
        for v in scan.offchain_votes.iter().filter(|v| v.voter_kind.is_contract()) {
            let _ = self.add_edge(
                vertex_for(v.voter, &labels),
                target.clone(),
                EdgeKind::OffChainVote,
                vec![EvidenceRef::of_offchain(v)],
            );
        }
    }

    /// Every edge endpoint is a vertex, no self-loops, evidence non-empty.
    pub fn validate(&self) -> Result<(), NetworkError> {
        for ((s, t, k), e) in &self.edges {
            if s == t {
                return Err(NetworkError::SelfLoop(s.clone(), t.clone()));
            }
            if e.evidence.is_empty() {
                return Err(NetworkError::NoEvidence { source_id: s.clone(), target: t.clone(), kind: *k });
            }
            for end in [s, t] {
                if !self.vertices.contains_key(end) {
                    return Err(NetworkError::MissingVertex(end.clone()));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn from_parts(
        vertices: Vec<DaoIdentity>,
        edges: Vec<MetagovEdge>,
        provenance: Provenance,
        scanned: BTreeSet<String>,
        leaves: BTreeSet<String>,
        funnel: Option<DelegationFunnel>,
    ) -> Result<Self, NetworkError> {
        let mut net = MetagovNetwork { provenance, scanned, leaves, funnel, ..Default::default() };
        for v in vertices {
            if net.vertices.insert(v.id.clone(), v).is_some() {
                return Err(NetworkError::Malformed("duplicate vertex".into()));
            }
        }
        for e in edges {
            let key = (e.source.clone(), e.target.clone(), e.kind);
            if net.edges.insert(key, e).is_some() {
                return Err(NetworkError::Malformed("duplicate edge".into()));
            }
        }
        net.validate()?;
        Ok(net)
    }
}

/// Builds the network from seed DAOs and their scans.
pub fn build_network(seed: &[DaoIdentity], scans: &[DaoScan], range: Option<ScanRange>) -> MetagovNetwork {
    let mut net = MetagovNetwork::new();
    for dao in seed {
        net.add_vertex(dao.clone());
    }
    for scan in scans {
        net.absorb(scan);
    }
    net.provenance = Provenance { scan_range: range, seed_hash: Some(seed_hash(seed)), expansion_depth: 0 };
    net
}

/// Scans DAOs on behalf of expansion.
pub trait DaoScanner {
    /// Handles for a discovered DAO; `None` means it cannot be scanned.
    fn suggest(&mut self, dao_id: &str) -> Option<DaoIdentity>;
    fn scan(&mut self, dao: &DaoIdentity) -> Result<DaoScan, String>;
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ExpansionRound {
    pub depth: u32,
    pub scanned: Vec<String>,
    pub leaves: Vec<String>,
    pub failures: Vec<(String, String)>,
    pub discovered: Vec<String>,
}

/// Scans newly discovered DAOs for up to `depth_limit` rounds. Each DAO is
/// visited at most once; DAOs without a scannable handle become leaves.
pub fn expand(net: &mut MetagovNetwork, scanner: &mut dyn DaoScanner, depth_limit: u32) -> Vec<ExpansionRound> {
    let mut rounds = Vec::new();
    for depth in 1..=depth_limit {
        let frontier: Vec<String> =
            net.vertices.keys().filter(|id| !net.scanned.contains(*id) && !net.leaves.contains(*id)).cloned().collect();
        if frontier.is_empty() {
            break;
        }
        let before: BTreeSet<String> = net.vertices.keys().cloned().collect();
        let mut round = ExpansionRound { depth, ..Default::default() };
        for id in frontier {
            let Some(dao) =
                scanner.suggest(&id).filter(|d| d.voting_power_address.is_some() || d.governor_address.is_some())
            else {
                net.leaves.insert(id.clone());
                round.leaves.push(id);
                continue;
            };
            net.add_vertex(dao.clone());
            match scanner.scan(&dao) {
                Ok(mut scan) => {
                    scan.dao.get_or_insert(dao);
                    net.absorb(&scan);
                    round.scanned.push(id);
                }
                Err(e) => {
                    net.leaves.insert(id.clone());
                    round.failures.push((id, e));
                }
            }
        }
        round.discovered = net.vertices.keys().filter(|id| !before.contains(*id)).cloned().collect();
        net.provenance.expansion_depth = depth;
        rounds.push(round);
    }
    rounds
}

/// Inputs for folding delegations into the network.
#[derive(Debug, Clone, Copy)]
pub struct DelegationInput<'a> {
    pub records: &'a [DelegationRecord],
    pub labels: &'a BTreeMap<Address, LabelRecord>,
    /// The DAO governed by each voting-power token.
    pub token_daos: &'a BTreeMap<Address, String>,
    /// Number of votes cast by each address.
    pub vote_counts: &'a BTreeMap<Address, u64>,
}

/// Turns delegations into `Delegation` edges from the delegate's DAO to the
/// token's DAO. Self-delegations are dropped; records are grouped into
/// distinct (delegator DAO, delegate DAO, token DAO) triples; a triple
/// counts only if one of its delegates voted; an edge is new when no
/// `Delegation` edge for the pair existed.
pub fn fold_delegations(net: &mut MetagovNetwork, input: &DelegationInput) -> DelegationFunnel {
    let mut funnel = DelegationFunnel { total: input.records.len() as u64, ..Default::default() };
    let labelled: BTreeSet<Address> = input
        .records
        .iter()
        .flat_map(|r| [r.delegator, r.delegate])
        .filter(|a| input.labels.get(a).is_some_and(LabelRecord::is_labelled))
        .collect();
    funnel.labelled_addresses = labelled.len() as u64;

    let mut groups: BTreeMap<(String, String, String), Vec<&DelegationRecord>> = BTreeMap::new();
    for r in input.records {
        if r.self_delegation {
            funnel.self_delegations += 1;
            continue;
        }
        let Some(token_dao) = input.token_daos.get(&r.token) else { continue };
        let from = vertex_for(r.delegator, input.labels).id;
        let to = vertex_for(r.delegate, input.labels).id;
        if from == to || &to == token_dao {
            continue;
        }
        groups.entry((from, to, token_dao.clone())).or_default().push(r);
    }
    funnel.distinct_dao_pairs = groups.len() as u64;

    for ((_, _, token_dao), records) in groups {
        let active = records.iter().any(|r| input.vote_counts.get(&r.delegate).copied().unwrap_or(0) > 0);
        if !active {
            continue;
        }
        funnel.active += 1;
        let delegate = vertex_for(records[0].delegate, input.labels);
        let target = net.vertex(&token_dao).cloned().unwrap_or_else(|| DaoIdentity::inferred(&token_dao, &token_dao));
        let evidence = records.iter().map(|r| EvidenceRef::of_delegation(r)).collect();
        if let Ok(true) = net.add_edge(delegate, target, EdgeKind::Delegation, evidence) {
            funnel.new_edges += 1;
        }
    }
    net.funnel = Some(funnel.clone());
    funnel
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeler::LabelSource;
    use crate::model::AccountKind;
    use crate::model::DaoSource;

    fn addr(n: u64) -> Address {
        Address::from_low_u64(n)
    }

    fn seed(id: &str, token: u64) -> DaoIdentity {
        DaoIdentity::new(id, id, Some(addr(token)), None, None, DaoSource::SeedList).unwrap()
    }

    fn vote(governor: Address, voter: Address, kind: AccountKind, proposal: u64, block: u64) -> VoteRecord {
        VoteRecord {
            governor,
            voter,
            voter_kind: kind,
            proposal_id: Some(proposal.to_string()),
            support: Some(1),
            weight: Some(10),
            block_number: block,
            tx_index: 0,
            log_index: 0,
        }
    }

    fn label(address: Address, tag: &str) -> LabelRecord {
        LabelRecord {
            address,
            tag: Some(tag.into()),
            source: Some(LabelSource::PublicNameTag),
            dao_id: crate::labeler::tag_to_dao_id(tag),
        }
    }

    #[test]
    fn contract_votes_become_one_edge_with_evidence() {
        let aave = seed("aave", 1);
        let liquity_safe = addr(50);
        let scan = DaoScan {
            dao: Some(aave.clone()),
            votes: vec![
                vote(addr(2), liquity_safe, AccountKind::Contract, 1, 10),
                vote(addr(2), liquity_safe, AccountKind::Contract, 2, 20),
                vote(addr(2), liquity_safe, AccountKind::Contract, 3, 5),
                vote(addr(2), addr(60), AccountKind::ExternallyOwned, 3, 6),
            ],
            labels: vec![label(liquity_safe, "Liquity: Bounties")],
            ..Default::default()
        };
        let net = build_network(&[aave], &[scan], None);
        let edge = net.edge("liquity", "aave", EdgeKind::OnChainVote).unwrap();
        assert_eq!(edge.evidence.len(), 3);
        assert_eq!(edge.first_seen, 5);
        assert_eq!(net.edge_count(), 1);
        assert_eq!(net.vertex("liquity").unwrap().display_name, "Liquity");
        net.validate().unwrap();
    }

    #[test]
    fn no_contract_voters_means_no_edges() {
        let daos = [seed("a", 1), seed("b", 2)];
        let net = build_network(&daos, &[], None);
        assert_eq!((net.vertex_count(), net.edge_count()), (2, 0));
        assert!(net.provenance.seed_hash.is_some());
    }

    #[test]
    fn unlabelled_voter_is_an_address_vertex_and_self_loops_are_refused() {
        let a = seed("a", 1);
        let mut net = MetagovNetwork::new();
        net.absorb(&DaoScan {
            dao: Some(a.clone()),
            votes: vec![
                vote(addr(2), addr(70), AccountKind::Contract, 1, 1),
                vote(addr(2), addr(71), AccountKind::Contract, 1, 1),
            ],
            labels: vec![label(addr(71), "A: Treasury")],
            ..Default::default()
        });
        assert!(net.vertex(&addr(70).to_string()).is_some());
        assert_eq!(net.edge_count(), 1);
        let err = net.add_edge(a.clone(), a, EdgeKind::OnChainVote, vec![]).unwrap_err();
        assert!(matches!(err, NetworkError::SelfLoop(..)));
    }

    #[test]
    fn seed_identity_survives_label_inference() {
        let mut net = MetagovNetwork::new();
        net.add_vertex(DaoIdentity::inferred("aave", "Aave"));
        net.add_vertex(seed("aave", 9));
        net.add_vertex(DaoIdentity::inferred("aave", "Other"));
        let v = net.vertex("aave").unwrap();
        assert_eq!(v.source, DaoSource::SeedList);
        assert_eq!(v.voting_power_address, Some(addr(9)));
    }

    struct ChainWorld {
        links: BTreeMap<String, String>,
        scans: Vec<String>,
    }

    impl DaoScanner for ChainWorld {
        fn suggest(&mut self, id: &str) -> Option<DaoIdentity> {
            let n = id.bytes().map(u64::from).sum::<u64>();
            Some(DaoIdentity::new(id, id, Some(addr(n)), None, None, DaoSource::Expansion).unwrap())
        }

        fn scan(&mut self, dao: &DaoIdentity) -> Result<DaoScan, String> {
            self.scans.push(dao.id.clone());
            let mut scan = DaoScan { dao: Some(dao.clone()), ..Default::default() };
            if let Some(voter) = self.links.get(&dao.id) {
                let a = addr(1000 + voter.len() as u64 * 7 + voter.bytes().map(u64::from).sum::<u64>());
                scan.votes.push(vote(addr(1), a, AccountKind::Contract, 1, 1));
                scan.labels.push(label(a, voter));
            }
            Ok(scan)
        }
    }

    fn chain_world(pairs: &[(&str, &str)]) -> ChainWorld {
        ChainWorld { links: pairs.iter().map(|(t, v)| (t.to_string(), v.to_string())).collect(), scans: Vec::new() }
    }

    #[test]
    fn expansion_stops_at_depth() {
        // "x" votes in "y" is written (y, x)
        let mut world = chain_world(&[("root", "a"), ("a", "b"), ("b", "c"), ("c", "d"), ("d", "e")]);
        let root = seed("root", 1);
        let first = world.scan(&root).unwrap();
        world.scans.clear();
        let mut net = build_network(&[root], &[first], None);
        let snapshot = net.clone();
        assert!(expand(&mut net, &mut world, 0).is_empty());
        assert_eq!(net, snapshot);

        let rounds = expand(&mut net, &mut world, 3);
        assert_eq!(world.scans, ["a", "b", "c"]);
        assert_eq!(rounds.len(), 3);
        assert!(net.vertex("d").is_some());
        assert!(!net.scanned.contains("d"));
        assert!(net.vertex("e").is_none());
    }

    #[test]
    fn cycles_terminate_and_fixed_point_is_stable() {
        let mut world = chain_world(&[("a", "b"), ("b", "a")]);
        let a = seed("a", 1);
        let first = world.scan(&a).unwrap();
        world.scans.clear();
        let mut net = build_network(&[a], &[first], None);
        expand(&mut net, &mut world, 10);
        assert_eq!(world.scans, ["b"]);
        let done = net.clone();
        expand(&mut net, &mut world, 3);
        assert_eq!(net, done);
        assert_eq!(world.scans, ["b"]);
    }

    fn delegation(token: Address, from: Address, to: Address, n: u64) -> DelegationRecord {
        DelegationRecord {
            token,
            delegator: from,
            delegate: to,
            delegator_kind: AccountKind::Contract,
            delegate_kind: AccountKind::Contract,
            self_delegation: from == to,
            block_number: n,
            tx_index: 0,
            log_index: 0,
        }
    }

    #[test]
    fn all_self_delegations_add_nothing() {
        let token = addr(1);
        let records: Vec<_> = (0..5).map(|i| delegation(token, addr(10 + i), addr(10 + i), i)).collect();
        let mut net = MetagovNetwork::new();
        let funnel = fold_delegations(
            &mut net,
            &DelegationInput {
                records: &records,
                labels: &BTreeMap::new(),
                token_daos: &BTreeMap::from([(token, "t".to_owned())]),
                vote_counts: &BTreeMap::new(),
            },
        );
        assert_eq!((funnel.total, funnel.self_delegations, funnel.new_edges), (5, 5, 0));
        assert_eq!(net.edge_count(), 0);
        assert!(funnel.is_monotone());
    }

    #[test]
    fn delegation_edge_is_distinct_from_vote_edge() {
        let token = addr(1);
        let (delegator, delegate) = (addr(10), addr(11));
        let labels = BTreeMap::from([
            (delegator, label(delegator, "X: Treasury")),
            (delegate, label(delegate, "Liquity: Bounties")),
        ]);
        let mut net = MetagovNetwork::new();
        net.add_vertex(seed("aave", 1));
        net.absorb(&DaoScan {
            dao: net.vertex("aave").cloned(),
            votes: vec![vote(addr(2), delegate, AccountKind::Contract, 95, 30)],
            labels: labels.values().cloned().collect(),
            ..Default::default()
        });
        let records = [delegation(token, delegator, delegate, 20)];
        let funnel = fold_delegations(
            &mut net,
            &DelegationInput {
                records: &records,
                labels: &labels,
                token_daos: &BTreeMap::from([(token, "aave".to_owned())]),
                vote_counts: &BTreeMap::from([(delegate, 1)]),
            },
        );
        assert_eq!(funnel.new_edges, 1);
        assert!(net.edge("liquity", "aave", EdgeKind::OnChainVote).is_some());
        assert!(net.edge("liquity", "aave", EdgeKind::Delegation).is_some());
    }
}
