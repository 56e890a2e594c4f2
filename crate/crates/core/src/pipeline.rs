//! End-to-end runs: seed lists, per-DAO scans, expansion and delegation
//! folding over any chain, Snapshot and name-tag source.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::chainio::{
    ChainError, ChainSource, FixtureChain, FixtureResponder, HttpRequest, RpcChain, RpcConfig, ScanRange, Transport,
    TransportError,
};
use crate::govscan::{GovernanceDetection, GovernanceScanner};
use crate::labeler::{
    space_hints, ExplorerTags, FixtureTags, LabelError, LabelRecord, Labeler, LocalOverrides, NameTagSource,
};
use crate::metanet::{
    build_network, expand, fold_delegations, DaoScan, DaoScanner, DelegationFunnel, DelegationInput, ExpansionRound,
    MetagovNetwork,
};
use crate::model::{Address, DaoIdentity, DaoSource};
use crate::scenarios::World;
use crate::sigstore::{KeywordPolicy, SignatureStore};
use crate::snapshotio::{
    fetch_offchain_votes, load_space_index, resolve_space, GraphqlSnapshot, SnapshotError, SnapshotFixture,
    SnapshotResponder, SnapshotSource, SpaceIndex,
};
use crate::voterscan::VoterScanner;

/// Layout of a fixture directory.
pub const CHAIN_DIR: &str = "chain";
pub const SNAPSHOT_DIR: &str = "snapshot";
pub const LABELS_FILE: &str = "labels.jsonl";
pub const OVERRIDES_FILE: &str = "overrides.csv";
pub const SEED_FILE: &str = "daos.csv";
pub const DIRECTORY_FILE: &str = "directory.csv";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("seed file {path}: {message}")]
    Seed { path: String, message: String },
    #[error("unknown dao {0:?}")]
    UnknownDao(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    /// The transport failure underneath, if any.
    pub fn transport(&self) -> Option<&TransportError> {
        match self {
            PipelineError::Transport(t)
            | PipelineError::Chain(ChainError::Transport(t))
            | PipelineError::Snapshot(SnapshotError::Transport(t))
            | PipelineError::Snapshot(SnapshotError::Chain(ChainError::Transport(t)))
            | PipelineError::Label(LabelError::Transport(t)) => Some(t),
            _ => None,
        }
    }

    /// Errors that must stop a run rather than mark one DAO as a leaf:
    /// anything that went wrong talking to a service, including replay
    /// misses.
    pub fn is_fatal(&self) -> bool {
        self.transport().is_some() || matches!(self, PipelineError::Io(_) | PipelineError::Seed { .. })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SeedRow {
    #[serde(rename = "dao-id")]
    dao_id: String,
    #[serde(rename = "display-name")]
    display_name: String,
    #[serde(rename = "voting-power-address", default)]
    voting_power_address: Option<String>,
    #[serde(rename = "snapshot-space", default)]
    snapshot_space: Option<String>,
}

fn nonempty(s: Option<String>) -> Option<String> {
    s.map(|s| s.trim().to_owned()).filter(|s| !s.is_empty())
}

/// Parses a seed CSV with columns `dao-id, display-name,
/// voting-power-address[, snapshot-space]`. Lines starting with `#` are
/// comments; ids must be unique.
pub fn parse_seed<R: Read>(input: R, source: DaoSource) -> Result<Vec<DaoIdentity>, String> {
    let mut reader =
        csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).comment(Some(b'#')).from_reader(input);
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, row) in reader.deserialize::<SeedRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| format!("line {line}: {e}"))?;
        let voting_power = nonempty(row.voting_power_address)
            .map(|a| a.parse::<Address>().map_err(|e| format!("line {line}: {e}")))
            .transpose()?;
        let id = row.dao_id.to_lowercase();
        if !seen.insert(id.clone()) {
            return Err(format!("line {line}: duplicate dao id {id:?}"));
        }
        let dao = DaoIdentity::new(&id, &row.display_name, voting_power, None, nonempty(row.snapshot_space), source)
            .map_err(|e| format!("line {line}: {e}"))?;
        out.push(dao);
    }
    Ok(out)
}

pub fn read_seed(path: &Path, source: DaoSource) -> Result<Vec<DaoIdentity>, PipelineError> {
    let file = fs::File::open(path)?;
    parse_seed(file, source).map_err(|message| PipelineError::Seed { path: path.display().to_string(), message })
}

pub fn write_seed(path: &Path, daos: &[DaoIdentity]) -> Result<(), PipelineError> {
    let seed_err = |e: csv::Error| PipelineError::Seed { path: path.display().to_string(), message: e.to_string() };
    let mut w = csv::Writer::from_path(path).map_err(seed_err)?;
    for d in daos {
        w.serialize(SeedRow {
            dao_id: d.id.clone(),
            display_name: d.display_name.clone(),
            voting_power_address: d.voting_power_address.map(|a| a.to_string()),
            snapshot_space: d.snapshot_space.clone(),
        })
        .map_err(seed_err)?;
    }
    w.flush()?;
    Ok(())
}

/// DAOs expansion is allowed to scan, by id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DaoDirectory {
    daos: BTreeMap<String, DaoIdentity>,
}

impl DaoDirectory {
    pub fn new(daos: impl IntoIterator<Item = DaoIdentity>) -> Self {
        DaoDirectory { daos: daos.into_iter().map(|d| (d.id.clone(), d)).collect() }
    }

    pub fn get(&self, id: &str) -> Option<&DaoIdentity> {
        self.daos.get(id)
    }

    pub fn len(&self) -> usize {
        self.daos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.daos.is_empty()
    }
}

/// Writes `world` in the fixture-directory layout.
pub fn write_fixture_dir(dir: &Path, world: &World) -> Result<(), PipelineError> {
    fs::create_dir_all(dir)?;
    world.chain.write_dir(&dir.join(CHAIN_DIR))?;
    world.snapshot.write_dir(&dir.join(SNAPSHOT_DIR))?;
    world.tags.write(&dir.join(LABELS_FILE))?;
    world.overrides.write(&dir.join(OVERRIDES_FILE))?;
    write_seed(&dir.join(SEED_FILE), &world.seed)?;
    write_seed(&dir.join(DIRECTORY_FILE), &world.directory)?;
    Ok(())
}

/// Service endpoints for the remote clients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoints {
    pub rpc: RpcConfig,
    pub hub_url: String,
    pub page_size: u64,
}

impl Endpoints {
    pub fn new(rpc_url: &str) -> Self {
        Endpoints {
            rpc: RpcConfig::new(rpc_url),
            hub_url: crate::snapshotio::DEFAULT_HUB_URL.to_owned(),
            page_size: 1000,
        }
    }
}

/// Everything a run reads from.
pub struct Sources {
    pub chain: Box<dyn ChainSource>,
    pub snapshot: Box<dyn SnapshotSource>,
    pub tags: Box<dyn NameTagSource>,
    pub overrides: LocalOverrides,
}

fn load_overrides(path: &Path) -> Result<LocalOverrides, LabelError> {
    if path.exists() {
        LocalOverrides::load(path)
    } else {
        Ok(LocalOverrides::new())
    }
}

impl Sources {
    /// Reads a fixture directory directly.
    pub fn from_fixture_dir(dir: &Path) -> Result<Self, PipelineError> {
        let labels = dir.join(LABELS_FILE);
        let tags = if labels.exists() { FixtureTags::load(&labels)? } else { FixtureTags::new() };
        Ok(Sources {
            chain: Box::new(FixtureChain::load(&dir.join(CHAIN_DIR))?),
            snapshot: Box::new(SnapshotFixture::load(&dir.join(SNAPSHOT_DIR))?),
            tags: Box::new(tags),
            overrides: load_overrides(&dir.join(OVERRIDES_FILE))?,
        })
    }

    /// Live clients sharing one transport: JSON-RPC and explorer for the
    /// chain, the explorer for name tags, GraphQL for Snapshot.
    pub fn remote(endpoints: &Endpoints, transport: Arc<dyn Transport>, overrides: LocalOverrides) -> Self {
        let rpc = &endpoints.rpc;
        Sources {
            chain: Box::new(RpcChain::new(rpc.clone(), transport.clone())),
            snapshot: Box::new(
                GraphqlSnapshot::new(&endpoints.hub_url, transport.clone()).with_page_size(endpoints.page_size),
            ),
            tags: Box::new(ExplorerTags::new(&rpc.explorer_url, rpc.explorer_api_key.clone(), transport)),
            overrides,
        }
    }
}

/// Answers every remote request of a run from a fixture directory, in
/// the services' wire formats. Recording a run against it yields a
/// journal that replays without any network.
pub struct FixtureServices {
    chain: FixtureResponder,
    snapshot: SnapshotResponder,
    tags: FixtureTags,
    hub_url: String,
}

impl FixtureServices {
    pub fn load(dir: &Path, endpoints: &Endpoints) -> Result<Self, PipelineError> {
        let labels = dir.join(LABELS_FILE);
        Ok(FixtureServices {
            chain: FixtureResponder::new(FixtureChain::load(&dir.join(CHAIN_DIR))?),
            snapshot: SnapshotResponder::new(SnapshotFixture::load(&dir.join(SNAPSHOT_DIR))?),
            tags: if labels.exists() { FixtureTags::load(&labels)? } else { FixtureTags::new() },
            hub_url: endpoints.hub_url.clone(),
        })
    }

    fn name_tag(&self, url: &str) -> Value {
        let address =
            url.split(['?', '&']).find_map(|kv| kv.strip_prefix("address=")).and_then(|a| a.parse::<Address>().ok());
        match address.and_then(|a| self.tags.name_tag(a).ok().flatten().map(|t| (a, t))) {
            Some((a, tag)) => {
                json!({ "status": "1", "message": "OK", "result": [{ "address": a.to_string(), "nametag": tag }] })
            }
            None => json!({ "status": "0", "message": "No data found", "result": [] }),
        }
    }
}

impl Transport for FixtureServices {
    fn send(&self, request: &HttpRequest) -> Result<Value, TransportError> {
        if request.url == self.hub_url {
            self.snapshot.send(request)
        } else if request.url.contains("module=nametag") {
            Ok(self.name_tag(&request.url))
        } else {
            self.chain.send(request)
        }
    }
}

/// Output of a full run.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub network: MetagovNetwork,
    /// Scans of seed DAOs followed by scans made during expansion.
    pub scans: Vec<DaoScan>,
    pub rounds: Vec<ExpansionRound>,
    pub funnel: DelegationFunnel,
}

pub struct Pipeline {
    chain: Box<dyn ChainSource>,
    snapshot: Box<dyn SnapshotSource>,
    labeler: Labeler,
    store: SignatureStore,
    policy: KeywordPolicy,
    range: ScanRange,
    directory: DaoDirectory,
    space_index: Option<SpaceIndex>,
}

impl Pipeline {
    pub fn new(sources: Sources, range: ScanRange) -> Self {
        let labeler = Labeler::new().with_overrides(sources.overrides).with_tags(sources.tags);
        Pipeline {
            chain: sources.chain,
            snapshot: sources.snapshot,
            labeler,
            store: SignatureStore::with_builtin(),
            policy: KeywordPolicy::default(),
            range,
            directory: DaoDirectory::default(),
            space_index: None,
        }
    }

    pub fn with_store(mut self, store: SignatureStore) -> Self {
        self.store = store;
        self
    }

    pub fn with_policy(mut self, policy: KeywordPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_directory(mut self, directory: DaoDirectory) -> Self {
        self.directory = directory;
        self
    }

    pub fn range(&self) -> ScanRange {
        self.range
    }

    pub fn chain(&self) -> &dyn ChainSource {
        self.chain.as_ref()
    }

    pub fn snapshot(&self) -> &dyn SnapshotSource {
        self.snapshot.as_ref()
    }

    /// The Snapshot space index, fetched once. Loading it also teaches the
    /// labeler which addresses spaces claim as treasuries.
    pub fn space_index(&mut self) -> Result<&SpaceIndex, PipelineError> {
        if self.space_index.is_none() {
            let index = load_space_index(self.snapshot.as_ref())?;
            for s in index.skipped() {
                log::warn!("skipped snapshot space record {}: {}", s.line, s.reason);
            }
            self.labeler.set_space_hints(space_hints(&index));
            self.space_index = Some(index);
        }
        Ok(self.space_index.as_ref().expect("just loaded"))
    }

    /// Governor detection for a DAO's voting-power contract.
    pub fn detect(&self, dao: &DaoIdentity) -> Result<Option<GovernanceDetection>, PipelineError> {
        let Some(token) = dao.voting_power_address else { return Ok(None) };
        let scanner = GovernanceScanner::new(self.chain.as_ref(), &self.store, &self.policy);
        Ok(Some(scanner.identify(token, self.range)?))
    }

    pub fn label(&mut self, addresses: &BTreeSet<Address>) -> Result<Vec<LabelRecord>, PipelineError> {
        self.space_index()?;
        Ok(self.labeler.label_accounts(addresses)?)
    }

    /// Governor, on-chain votes, delegations, Snapshot space and votes,
    /// and labels for one DAO.
    pub fn scan_dao(&mut self, dao: &DaoIdentity) -> Result<DaoScan, PipelineError> {
        let mut dao = dao.clone();
        let mut scan = DaoScan::default();
        let end = self.range.end_block;

        if dao.governor_address.is_none() {
            if let Some(detection) = self.detect(&dao)? {
                match detection.chosen {
                    Some(g) => {
                        scan.notes.push(format!("governor {g} chosen among {} candidates", detection.candidates.len()));
                        dao.governor_address = Some(g);
                    }
                    None => scan.notes.push("no governance contract calls the voting-power contract".into()),
                }
            }
        }

        let voters = VoterScanner::new(self.chain.as_ref(), &self.store, &self.policy);
        if let Some(governor) = dao.governor_address {
            let votes = voters.extract_vote_records(governor, self.range)?;
            match (&votes.selection.topic, &votes.selection.known_signature) {
                (None, _) => scan.notes.push(format!("governor {governor} emitted no logs")),
                (Some(t), Some(sig)) => scan.notes.push(format!("voting event {sig} ({t})")),
                (Some(t), None) => scan.notes.push(format!("voting event {t}")),
            }
            if !votes.failures.is_empty() {
                scan.notes.push(format!("{} vote logs failed to decode", votes.failures.len()));
            }
            scan.votes = votes.records;
        }
        if let Some(token) = dao.voting_power_address {
            let delegations = voters.resolve_delegations(token, self.range)?;
            if delegations.no_abi {
                scan.notes.push("voting-power contract has no ABI; delegations not resolved".into());
            } else if delegations.no_delegation_events {
                scan.notes.push("voting-power contract has no delegation events".into());
            }
            scan.delegations = delegations.records;
        }

        let space = match (&dao.snapshot_space, dao.voting_power_address) {
            (Some(s), _) => Some(s.clone()),
            (None, Some(token)) => resolve_space(self.space_index()?, token).map(|s| s.id.clone()),
            (None, None) => None,
        };
        if let Some(space) = space {
            scan.offchain_votes = fetch_offchain_votes(self.snapshot.as_ref(), &space, self.chain.as_ref(), end)?;
            dao.snapshot_space = Some(space);
        }

        let parties: BTreeSet<Address> = scan
            .votes
            .iter()
            .filter(|v| v.voter_kind.is_contract())
            .map(|v| v.voter)
            .chain(scan.offchain_votes.iter().filter(|v| v.voter_kind.is_contract()).map(|v| v.voter))
            .chain(scan.delegations.iter().flat_map(|d| [d.delegator, d.delegate]))
            .collect();
        scan.labels = self.label(&parties)?;
        scan.dao = Some(dao);
        Ok(scan)
    }

    /// Scans the seed, expands to `depth` rounds and folds delegations.
    pub fn run(&mut self, seed: &[DaoIdentity], depth: u32) -> Result<RunOutput, PipelineError> {
        let mut scans = Vec::with_capacity(seed.len());
        for dao in seed {
            match self.scan_dao(dao) {
                Ok(scan) => scans.push(scan),
                Err(e) if e.is_fatal() => return Err(e),
                Err(e) => log::warn!("seed dao {} not scanned: {e}", dao.id),
            }
        }
        let mut network = build_network(seed, &scans, Some(self.range));
        let seeds: BTreeMap<String, DaoIdentity> = seed.iter().map(|d| (d.id.clone(), d.clone())).collect();
        let mut expander = Expander { pipeline: self, seeds, scans: Vec::new(), fatal: None };
        let rounds = expand(&mut network, &mut expander, depth);
        if let Some(e) = expander.fatal {
            return Err(e);
        }
        scans.extend(expander.scans);

        let funnel = fold_all(&mut network, &scans);
        Ok(RunOutput { network, scans, rounds, funnel })
    }
}

/// Folds the delegations of every scan into `net`.
pub fn fold_all(net: &mut MetagovNetwork, scans: &[DaoScan]) -> DelegationFunnel {
    let mut labels = BTreeMap::new();
    let mut token_daos = BTreeMap::new();
    let mut vote_counts: BTreeMap<Address, u64> = BTreeMap::new();
    let mut records = Vec::new();
    for scan in scans {
        for l in &scan.labels {
            labels.entry(l.address).or_insert_with(|| l.clone());
        }
        if let Some(token) = scan.dao.as_ref().and_then(|d| d.voting_power_address.map(|t| (t, d.id.clone()))) {
            token_daos.insert(token.0, token.1);
        }
        for v in &scan.votes {
            *vote_counts.entry(v.voter).or_insert(0) += 1;
        }
        records.extend(scan.delegations.iter().cloned());
    }
    records.sort_by_key(|r| (r.token, r.block_number, r.tx_index, r.log_index));
    records.dedup();
    let input =
        DelegationInput { records: &records, labels: &labels, token_daos: &token_daos, vote_counts: &vote_counts };
    fold_delegations(net, &input)
}

struct Expander<'p> {
    pipeline: &'p mut Pipeline,
    seeds: BTreeMap<String, DaoIdentity>,
    scans: Vec<DaoScan>,
    fatal: Option<PipelineError>,
}

impl DaoScanner for Expander<'_> {
    fn suggest(&mut self, dao_id: &str) -> Option<DaoIdentity> {
        if self.fatal.is_some() {
            return None;
        }
        self.pipeline.directory.get(dao_id).or_else(|| self.seeds.get(dao_id)).cloned()
    }

    fn scan(&mut self, dao: &DaoIdentity) -> Result<DaoScan, String> {
        if self.fatal.is_some() {
            return Err("run aborted".into());
        }
        match self.pipeline.scan_dao(dao) {
            Ok(scan) => {
                self.scans.push(scan.clone());
                Ok(scan)
            }
            Err(e) => {
                let message = e.to_string();
                if e.is_fatal() {
                    self.fatal = Some(e);
                }
                Err(message)
            }
        }
    }
}
