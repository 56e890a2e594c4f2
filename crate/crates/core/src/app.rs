//! The `metagov` command line: argument parsing and command execution.
//!
//! Commands share a state directory (default `.metagov/`):
//!
//! - `daos.csv`, `directory.csv`: written by `seed`
//! - `scans/<dao>.json`: written by `scan`
//! - `network.json`, `scans.jsonl`, `rounds.json`: written by `expand`

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::chainio::{FixtureChain, HttpTransport, RecordingTransport, ReplayTransport, ScanRange, Transport};
use crate::config::{Config, ConfigError};
use crate::labeler::LocalOverrides;
use crate::metanet::{
    decisive_report, degree_report, export, mention_report, parse_json, share_report, DaoScan, ExportFormat,
    MentionTarget, MetagovNetwork, NetworkError, QuorumMajority, SimpleMajority, ThresholdRule,
};
use crate::model::{Address, DaoIdentity, DaoSource};
use crate::pipeline::{self, DaoDirectory, FixtureServices, Pipeline, PipelineError, Sources};
use crate::sigstore::{SignatureKind, SignatureStore, StoreError};
use crate::voterscan::{read_jsonl, write_jsonl, VoteRecord};

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{0}")]
    Usage(String),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl AppError {
    /// The reader of our output went away, as with `metagov report ... | head`.
    pub fn is_broken_pipe(&self) -> bool {
        match self {
            AppError::Io(e) => e.kind() == io::ErrorKind::BrokenPipe,
            AppError::Json(e) => e.io_error_kind() == Some(io::ErrorKind::BrokenPipe),
            _ => false,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "metagov", version, about = "Detect DAO-to-DAO metagovernance")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Read chain, Snapshot and label data from a fixture directory.
    #[arg(long, global = true, value_name = "DIR", conflicts_with = "rpc")]
    pub fixtures: Option<PathBuf>,
    /// Archive node JSON-RPC endpoint (overrides config and METAGOV_RPC_URL).
    #[arg(long, global = true, value_name = "URL")]
    pub rpc: Option<String>,
    /// Serve every remote request from a journal; a missing entry is an error.
    #[arg(long, global = true, value_name = "JOURNAL", conflicts_with_all = ["record", "rpc"])]
    pub replay: Option<PathBuf>,
    /// Append every remote exchange to a journal.
    #[arg(long, global = true, value_name = "JOURNAL")]
    pub record: Option<PathBuf>,
    /// Inclusive block range START:END.
    #[arg(long, global = true, value_name = "A:B")]
    pub block_range: Option<ScanRange>,
    #[arg(long, global = true, value_name = "DIR", default_value = ".metagov")]
    pub state: PathBuf,
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// CSV of local label overrides (address,tag,dao-id).
    #[arg(long, global = true, value_name = "FILE")]
    pub overrides: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Validate a seed list and store it in the state directory.
    Seed {
        #[arg(short = 'f', long = "file")]
        file: PathBuf,
        /// DAOs that expansion may scan, same columns as the seed.
        #[arg(long)]
        directory: Option<PathBuf>,
    },
    /// Identify a DAO's governance contract.
    Detect {
        #[arg(long)]
        dao: String,
    },
    /// Scan one DAO: governor, votes, delegations, Snapshot votes, labels.
    Scan {
        #[arg(long)]
        dao: String,
    },
    /// Scan the seed, expand through discovered DAOs and fold delegations.
    Expand {
        #[arg(long, default_value_t = 3)]
        depth: u32,
    },
    /// Export the network built by `expand`.
    Graph {
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
        #[arg(long, default_value = "graphml")]
        format: ExportFormat,
    },
    /// Analyses over the network built by `expand`.
    Report {
        #[command(subcommand)]
        report: ReportCommand,
    },
}

#[derive(Debug, Clone, Subcommand)]
pub enum ReportCommand {
    /// Voting-power shares behind on-chain vote edges.
    Shares,
    /// Whether contract voters decided proposals.
    Decisive {
        #[arg(long, conflicts_with = "governor")]
        dao: Option<String>,
        #[arg(long)]
        governor: Option<Address>,
        #[arg(long)]
        proposal: Option<String>,
        /// Minimum turnout in base units; without it a simple majority applies.
        #[arg(long)]
        quorum: Option<u128>,
        #[arg(long, requires = "quorum")]
        abstain_counts: bool,
    },
    /// How often a DAO's proposals name other DAOs, against its votes in them.
    Mentions {
        #[arg(long)]
        source: String,
        /// `ID` or `ID=Name,Other Name`; defaults to every other vertex.
        #[arg(long = "target", value_name = "ID[=NAMES]")]
        targets: Vec<String>,
    },
    /// Delegation funnel counts.
    Funnel,
    /// In- and out-degree per DAO.
    Degree,
}

const NETWORK_FILE: &str = "network.json";
const SCANS_FILE: &str = "scans.jsonl";
const ROUNDS_FILE: &str = "rounds.json";

fn print_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), AppError> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn print_lines<T: Serialize>(out: &mut dyn Write, rows: &[T]) -> Result<(), AppError> {
    for r in rows {
        serde_json::to_writer(&mut *out, r)?;
        writeln!(out)?;
    }
    Ok(())
}

struct Context {
    global: GlobalArgs,
    config: Config,
}

impl Context {
    fn new(global: GlobalArgs) -> Result<Self, AppError> {
        let mut config = match &global.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        config.apply_env(|k| std::env::var(k).ok());
        if let Some(url) = &global.rpc {
            config.rpc.url = url.clone();
        }
        Ok(Context { global, config })
    }

    fn state(&self, name: &str) -> PathBuf {
        self.global.state.join(name)
    }

    /// A state file, falling back to the fixture directory.
    fn input_file(&self, name: &str) -> Option<PathBuf> {
        let state = self.state(name);
        if state.exists() {
            return Some(state);
        }
        self.global.fixtures.as_ref().map(|d| d.join(name)).filter(|p| p.exists())
    }

    fn seed(&self) -> Result<Vec<DaoIdentity>, AppError> {
        let path = self
            .input_file(pipeline::SEED_FILE)
            .ok_or_else(|| AppError::Usage("no seed list; run `metagov seed -f daos.csv` first".into()))?;
        Ok(pipeline::read_seed(&path, DaoSource::SeedList)?)
    }

    fn directory(&self) -> Result<DaoDirectory, AppError> {
        match self.input_file(pipeline::DIRECTORY_FILE) {
            Some(path) => Ok(DaoDirectory::new(pipeline::read_seed(&path, DaoSource::Expansion)?)),
            None => Ok(DaoDirectory::default()),
        }
    }

    fn find_dao(&self, id: &str) -> Result<DaoIdentity, AppError> {
        let id = id.to_lowercase();
        if let Some(d) = self.seed()?.into_iter().find(|d| d.id == id) {
            return Ok(d);
        }
        self.directory()?.get(&id).cloned().ok_or_else(|| PipelineError::UnknownDao(id).into())
    }

    fn overrides(&self) -> Result<LocalOverrides, AppError> {
        let path = self
            .global
            .overrides
            .clone()
            .or_else(|| self.global.fixtures.as_ref().map(|d| d.join(pipeline::OVERRIDES_FILE)));
        match path.filter(|p| p.exists()) {
            Some(p) => Ok(LocalOverrides::load(&p).map_err(PipelineError::from)?),
            None => Ok(LocalOverrides::new()),
        }
    }

    fn range(&self) -> Result<ScanRange, AppError> {
        if let Some(r) = self.global.block_range {
            return Ok(r);
        }
        if let Some(r) = self.config.block_range().map_err(AppError::Usage)? {
            return Ok(r);
        }
        match (&self.global.fixtures, &self.global.replay) {
            (Some(dir), None) => {
                Ok(FixtureChain::load(&dir.join(pipeline::CHAIN_DIR)).map_err(PipelineError::from)?.full_range())
            }
            _ => Ok(ScanRange::production()),
        }
    }

    fn remote(&self, transport: Arc<dyn Transport>) -> Result<Sources, AppError> {
        let transport: Arc<dyn Transport> = match &self.global.record {
            Some(journal) => Arc::new(RecordingTransport::new(transport, journal).map_err(PipelineError::from)?),
            None => transport,
        };
        Ok(Sources::remote(&self.config.endpoints(), transport, self.overrides()?))
    }

    fn sources(&self) -> Result<Sources, AppError> {
        let g = &self.global;
        if let Some(journal) = &g.replay {
            let replay = ReplayTransport::open(journal).map_err(PipelineError::from)?;
            return self.remote(Arc::new(replay));
        }
        match (&g.fixtures, &g.record) {
            (Some(dir), None) => {
                let mut sources = Sources::from_fixture_dir(dir)?;
                if g.overrides.is_some() {
                    sources.overrides = self.overrides()?;
                }
                Ok(sources)
            }
            (Some(dir), Some(_)) => self.remote(Arc::new(FixtureServices::load(dir, &self.config.endpoints())?)),
            (None, _) => self.remote(Arc::new(HttpTransport::new(self.config.retry))),
        }
    }

    fn pipeline(&self) -> Result<Pipeline, AppError> {
        let mut store = SignatureStore::with_builtin();
        for path in &self.config.scan.signatures {
            let kind = if path.to_string_lossy().contains("function") {
                SignatureKind::Function
            } else {
                SignatureKind::Event
            };
            let report = store.ingest_file(path, kind)?;
            log::info!("{}: {} signatures, {} rejected", path.display(), report.added, report.failures.len());
        }
        Ok(Pipeline::new(self.sources()?, self.range()?)
            .with_store(store)
            .with_policy(self.config.policy())
            .with_directory(self.directory()?))
    }

    fn network(&self) -> Result<MetagovNetwork, AppError> {
        let path = self.state(NETWORK_FILE);
        let text = fs::read_to_string(&path)
            .map_err(|e| AppError::Usage(format!("{}: {e}; run `metagov expand` first", path.display())))?;
        Ok(parse_json(&text)?)
    }

    fn scans(&self) -> Result<Vec<DaoScan>, AppError> {
        let file = fs::File::open(self.state(SCANS_FILE))?;
        Ok(read_jsonl(BufReader::new(file))?)
    }
}

fn parse_target(text: &str) -> MentionTarget {
    match text.split_once('=') {
        Some((id, names)) => MentionTarget {
            dao_id: id.trim().to_lowercase(),
            names: names.split(',').map(|n| n.trim().to_owned()).filter(|n| !n.is_empty()).collect(),
        },
        None => MentionTarget { dao_id: text.trim().to_lowercase(), names: vec![text.trim().to_owned()] },
    }
}

#[derive(Serialize)]
struct ScanSummary<'a> {
    dao: Option<&'a DaoIdentity>,
    votes: usize,
    contract_voters: usize,
    offchain_votes: usize,
    delegations: usize,
    labelled: usize,
    notes: &'a [String],
}

impl<'a> ScanSummary<'a> {
    fn of(scan: &'a DaoScan) -> Self {
        let contract: BTreeSet<Address> =
            scan.votes.iter().filter(|v| v.voter_kind.is_contract()).map(|v| v.voter).collect();
        ScanSummary {
            dao: scan.dao.as_ref(),
            votes: scan.votes.len(),
            contract_voters: contract.len(),
            offchain_votes: scan.offchain_votes.len(),
            delegations: scan.delegations.len(),
            labelled: scan.labels.iter().filter(|l| l.is_labelled()).count(),
            notes: &scan.notes,
        }
    }
}

/// Runs one parsed command, writing results to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), AppError> {
    let ctx = Context::new(cli.global)?;
    match cli.command {
        Command::Seed { file, directory } => {
            let seed = pipeline::read_seed(&file, DaoSource::SeedList)?;
            fs::create_dir_all(&ctx.global.state)?;
            pipeline::write_seed(&ctx.state(pipeline::SEED_FILE), &seed)?;
            let listed = match directory {
                Some(path) => {
                    let listed = pipeline::read_seed(&path, DaoSource::Expansion)?;
                    pipeline::write_seed(&ctx.state(pipeline::DIRECTORY_FILE), &listed)?;
                    listed.len()
                }
                None => 0,
            };
            print_json(out, &serde_json::json!({ "seed": seed.len(), "directory": listed, "state": ctx.global.state }))
        }
        Command::Detect { dao } => {
            let dao = ctx.find_dao(&dao)?;
            let detection = ctx
                .pipeline()?
                .detect(&dao)?
                .ok_or_else(|| AppError::Usage(format!("dao {} has no voting-power address", dao.id)))?;
            print_json(out, &detection)
        }
        Command::Scan { dao } => {
            let dao = ctx.find_dao(&dao)?;
            let scan = ctx.pipeline()?.scan_dao(&dao)?;
            let dir = ctx.state("scans");
            fs::create_dir_all(&dir)?;
            fs::write(dir.join(format!("{}.json", dao.id)), serde_json::to_string_pretty(&scan)? + "\n")?;
            print_json(out, &ScanSummary::of(&scan))
        }
        Command::Expand { depth } => {
            let seed = ctx.seed()?;
            let result = ctx.pipeline()?.run(&seed, depth)?;
            fs::create_dir_all(&ctx.global.state)?;
            fs::write(ctx.state(NETWORK_FILE), export(&result.network, ExportFormat::Json))?;
            write_jsonl(&result.scans, fs::File::create(ctx.state(SCANS_FILE))?)?;
            fs::write(ctx.state(ROUNDS_FILE), serde_json::to_string_pretty(&result.rounds)? + "\n")?;
            print_json(
                out,
                &serde_json::json!({
                    "vertices": result.network.vertex_count(),
                    "edges": result.network.edge_count(),
                    "scanned": result.network.scanned,
                    "leaves": result.network.leaves,
                    "rounds": result.rounds.len(),
                    "funnel": result.funnel,
                }),
            )
        }
        Command::Graph { output, format } => {
            let doc = export(&ctx.network()?, format);
            match output {
                Some(path) => Ok(fs::write(path, doc)?),
                None => Ok(out.write_all(doc.as_bytes())?),
            }
        }
        Command::Report { report } => run_report(&ctx, report, out),
    }
}

fn run_report(ctx: &Context, report: ReportCommand, out: &mut dyn Write) -> Result<(), AppError> {
    match report {
        ReportCommand::Shares => {
            let votes: Vec<VoteRecord> = ctx.scans()?.into_iter().flat_map(|s| s.votes).collect();
            print_json(out, &share_report(&ctx.network()?, &votes))
        }
        ReportCommand::Decisive { dao, governor, proposal, quorum, abstain_counts } => {
            let scans = ctx.scans()?;
            let governor = match (governor, dao) {
                (Some(g), _) => g,
                (None, Some(id)) => scans
                    .iter()
                    .filter_map(|s| s.dao.as_ref())
                    .find(|d| d.id == id.to_lowercase())
                    .and_then(|d| d.governor_address)
                    .ok_or_else(|| AppError::Usage(format!("no scanned governor for dao {id:?}")))?,
                (None, None) => return Err(AppError::Usage("pass --dao or --governor".into())),
            };
            let mut by_proposal: BTreeMap<String, Vec<VoteRecord>> = BTreeMap::new();
            for v in scans.into_iter().flat_map(|s| s.votes).filter(|v| v.governor == governor) {
                if let Some(p) = v.proposal_id.clone() {
                    by_proposal.entry(p).or_default().push(v);
                }
            }
            let rule: Box<dyn ThresholdRule> = match quorum {
                Some(quorum) => Box::new(QuorumMajority { quorum, abstain_counts }),
                None => Box::new(SimpleMajority),
            };
            let reports: Vec<_> = by_proposal
                .into_iter()
                .filter(|(p, votes)| match &proposal {
                    Some(wanted) => p == wanted,
                    None => votes.iter().any(|v| v.voter_kind.is_contract()),
                })
                .map(|(_, votes)| decisive_report(&votes, rule.as_ref()))
                .collect();
            print_lines(out, &reports)
        }
        ReportCommand::Mentions { source, targets } => {
            let net = ctx.network()?;
            let source = source.to_lowercase();
            let space = net
                .vertex(&source)
                .and_then(|d| d.snapshot_space.clone())
                .ok_or_else(|| AppError::Usage(format!("dao {source:?} has no snapshot space in the network")))?;
            let proposals = ctx.sources()?.snapshot.proposals(&space).map_err(PipelineError::from)?;
            let targets: Vec<MentionTarget> = if targets.is_empty() {
                net.vertices()
                    .filter(|v| v.id != source && !v.id.starts_with("0x"))
                    .map(|v| MentionTarget { dao_id: v.id.clone(), names: vec![v.display_name.clone()] })
                    .collect()
            } else {
                targets.iter().map(|t| parse_target(t)).collect()
            };
            print_lines(out, &mention_report(&net, &source, &proposals, &targets))
        }
        ReportCommand::Funnel => {
            let net = ctx.network()?;
            let funnel = net.funnel.ok_or_else(|| AppError::Usage("network has no delegation funnel".into()))?;
            print_json(
                out,
                &serde_json::json!({ "funnel": funnel, "monotone": funnel.is_monotone(), "non_self": funnel.non_self() }),
            )
        }
        ReportCommand::Degree => print_lines(out, &degree_report(&ctx.network()?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_parses_documented_commands() {
        let parse = |args: &[&str]| Cli::try_parse_from(args.iter().copied());
        assert!(parse(&["metagov", "seed", "-f", "daos.csv"]).is_ok());
        assert!(parse(&["metagov", "detect", "--dao", "aave", "--fixtures", "fx"]).is_ok());
        assert!(parse(&["metagov", "--rpc", "http://x", "scan", "--dao", "aave"]).is_ok());
        assert!(parse(&["metagov", "expand", "--depth", "3", "--block-range", "0:100"]).is_ok());
        assert!(parse(&["metagov", "graph", "-o", "out.graphml", "--format", "graphml"]).is_ok());
        for r in ["shares", "funnel", "degree"] {
            assert!(parse(&["metagov", "report", r]).is_ok());
        }
        assert!(parse(&["metagov", "report", "decisive", "--dao", "compound", "--proposal", "100"]).is_ok());
        assert!(parse(&["metagov", "report", "mentions", "--source", "index", "--target", "aave=Aave"]).is_ok());
        assert!(parse(&["metagov", "--fixtures", "a", "--rpc", "b", "expand"]).is_err());
        assert!(parse(&["metagov", "--block-range", "9:1", "expand"]).is_err());
        assert!(parse(&["metagov", "graph", "--format", "png"]).is_err());
    }

    #[test]
    fn mention_targets_parse() {
        let t = parse_target("Aave=Aave, AAVE ,");
        assert_eq!(t.dao_id, "aave");
        assert_eq!(t.names, vec!["Aave", "AAVE"]);
        assert_eq!(parse_target("uniswap").names, vec!["uniswap"]);
    }
}
