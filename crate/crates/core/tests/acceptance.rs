//! Acceptance gate: one pass/fail line per criterion.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use metagov::abidec::{decode_event, encode_event, scavenge_addresses};
use metagov::chainio::{RecordingTransport, ReplayTransport, ScanRange, Transport};
use metagov::govscan::GovernanceScanner;
use metagov::labeler::LocalOverrides;
use metagov::metanet::{decisive_report, export, share_report, EdgeKind, ExportFormat, Side, SimpleMajority};
use metagov::model::{Address, CanonicalSignature, EventLogRecord};
use metagov::pipeline::{DaoDirectory, Endpoints, FixtureServices, Pipeline, RunOutput, Sources, OVERRIDES_FILE};
use metagov::scenarios::{self, tokens, World};
use metagov::sigstore::{KeywordPolicy, SignatureStore};
use metagov::snapshotio::{load_space_index, resolve_space};
use metagov::voterscan::VoterScanner;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{oracle_keccak, random_event, random_signature};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(limit: Duration, started: Instant) -> Result<Duration, String> {
    let took = started.elapsed();
    ensure!(took < limit, "took {took:?}, limit {limit:?}");
    Ok(took)
}

fn run_world(world: &World, depth: u32) -> Result<RunOutput, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    world.write_dir(dir.path()).map_err(|e| e.to_string())?;
    let sources = Sources::from_fixture_dir(dir.path()).map_err(|e| e.to_string())?;
    Pipeline::new(sources, world.range())
        .with_directory(DaoDirectory::new(world.directory.clone()))
        .run(&world.seed, depth)
        .map_err(|e| e.to_string())
}

fn governor_detection() -> Check {
    let started = Instant::now();
    let store = SignatureStore::with_builtin();
    let policy = KeywordPolicy::default();

    let case = scenarios::governor_token();
    let found = GovernanceScanner::new(&case.chain, &store, &policy)
        .identify(case.token, case.chain.full_range())
        .map_err(|e| e.to_string())?;
    ensure!(found.chosen == Some(case.governor), "governor-token chose {:?}, want {}", found.chosen, case.governor);
    ensure!(!found.candidates.iter().any(|c| c.address == case.router), "router qualified as a candidate");

    let case = scenarios::locker_shadow();
    let found = GovernanceScanner::new(&case.chain, &store, &policy)
        .identify(case.token, case.chain.full_range())
        .map_err(|e| e.to_string())?;
    ensure!(found.chosen == Some(case.locker), "locker-shadow chose {:?}, want locker {}", found.chosen, case.locker);

    let took = within(Duration::from_secs(1), started)?;
    Ok(format!("governor chosen over router; locker false positive reproduced; {took:?}"))
}

fn voting_event_and_contract_voters() -> Check {
    let started = Instant::now();
    let case = scenarios::voting_governor();
    let store = SignatureStore::with_builtin();
    let policy = KeywordPolicy::default();
    let scanner = VoterScanner::new(&case.chain, &store, &policy);

    let selection = scanner.select_voting_event(case.governor, case.range).map_err(|e| e.to_string())?;
    ensure!(selection.topic == Some(case.vote_topic), "picked {:?}", selection.topic);
    let counts: Vec<u64> = selection.frequency_table.iter().map(|(_, n)| *n).collect();
    ensure!(counts == [120, 9, 9], "frequency table {counts:?}");

    let found = scanner.identify_multisig_voters(case.governor, case.range).map_err(|e| e.to_string())?;
    let hits = found.intersection(&case.contract_voters).count() as f64;
    let precision = if found.is_empty() { 0.0 } else { hits / found.len() as f64 };
    let recall = hits / case.contract_voters.len() as f64;
    ensure!(precision == 1.0 && recall == 1.0, "precision {precision} recall {recall}");

    let took = within(Duration::from_secs(1), started)?;
    Ok(format!("120-count topic chosen; precision 1.0 recall 1.0 over {} contract voters; {took:?}", found.len()))
}

fn decisive_vote() -> Check {
    let case = scenarios::compound_proposal_100();
    let out = run_world(&case.world, 0)?;
    let wanted = case.proposal.to_string();
    let votes: Vec<_> =
        out.scans[0].votes.iter().filter(|v| v.proposal_id.as_deref() == Some(wanted.as_str())).cloned().collect();
    let r = decisive_report(&votes, &SimpleMajority);
    ensure!(r.tally.for_votes == tokens(492_678), "for {}", r.tally.for_votes);
    ensure!(r.tally.against_votes == tokens(499_849), "against {}", r.tally.against_votes);
    ensure!(r.pivotal_voter == Some(case.multisig), "pivotal {:?}", r.pivotal_voter);
    ensure!(r.pivotal_weight == Some(tokens(50_007)), "pivotal weight {:?}", r.pivotal_weight);
    ensure!(r.flipped, "not flipped");
    let after = r.tally.without(Side::Against, tokens(50_007));
    ensure!(after.against_votes == tokens(449_842) && after.for_votes > after.against_votes, "after removal {after:?}");
    Ok("492678 for / 499849 against; pivotal 50007 flips to 492678 > 449842".into())
}

fn voting_power_share() -> Check {
    let case = scenarios::liquity_on_aave();
    let out = run_world(&case.world, 0)?;
    let votes: Vec<_> = out.scans.iter().flat_map(|s| s.votes.iter().cloned()).collect();
    let report = share_report(&out.network, &votes);
    let row = report.rows.iter().find(|r| r.voter == case.treasury).ok_or("no share row for the treasury")?;
    ensure!(row.voter_weight == tokens(100_000), "weight {}", row.voter_weight);
    ensure!(row.total_weight == tokens(case.total_tokens), "total {}", row.total_weight);
    ensure!((0.165..=0.175).contains(&row.share), "share {}", row.share);
    ensure!(row.flagged, "share above 15% not flagged");
    Ok(format!("100000 / {} = {:.4}, flagged", case.total_tokens, row.share))
}

fn delegation_funnel() -> Check {
    let case = scenarios::delegation_funnel();
    let out = run_world(&case.world, 0)?;
    let f = &out.funnel;
    let counts = [f.total, f.self_delegations, f.distinct_dao_pairs, f.active, f.new_edges];
    ensure!(counts == [20, 7, 5, 3, 2], "funnel {counts:?}");
    let edges = out.network.edges().filter(|e| e.kind == EdgeKind::Delegation).count();
    ensure!(edges == 2, "{edges} delegation edges");
    Ok("20 -> 7 self -> 5 distinct -> 3 active -> 2 new; 2 delegation edges".into())
}

fn snapshot_resolution() -> Check {
    let case = scenarios::snapshot_boundary();
    let index = load_space_index(&case.snapshot).map_err(|e| e.to_string())?;
    let at = resolve_space(&index, case.at_threshold).map(|s| s.id.clone());
    ensure!(at.as_deref() == Some("fifty.eth"), "at threshold resolved to {at:?}");
    let below = resolve_space(&index, case.below_threshold).map(|s| s.id.clone());
    ensure!(below.is_none(), "below threshold resolved to {below:?}");
    let contested = resolve_space(&index, case.contested).map(|s| s.id.clone());
    ensure!(contested.as_deref() == Some("official.eth"), "contested resolved to {contested:?}");
    Ok("50 followers qualify, 49 do not; most-followed space wins".into())
}

fn bounded_expansion() -> Check {
    let started = Instant::now();
    let out = run_world(&scenarios::expansion_chain(), 3)?;
    let expanded: Vec<String> = out.rounds.iter().flat_map(|r| r.scanned.clone()).collect();
    ensure!(expanded == ["a", "b", "c"], "expansion scanned {expanded:?}");
    let scanned: Vec<&str> = out.network.scanned.iter().map(String::as_str).collect();
    ensure!(scanned == ["a", "b", "c", "root"], "scanned set {scanned:?}");
    ensure!(out.network.vertex("d").is_some(), "d not discovered");
    ensure!(out.network.vertex("e").is_none(), "e discovered beyond the depth limit");

    let out = run_world(&scenarios::expansion_cycle(), 50)?;
    let mut seen = BTreeSet::new();
    for id in std::iter::once("x".to_owned()).chain(out.rounds.iter().flat_map(|r| r.scanned.clone())) {
        ensure!(seen.insert(id.clone()), "{id} scanned twice");
    }
    ensure!(out.rounds.len() < 50, "cycle ran {} rounds", out.rounds.len());
    ensure!(
        out.network.edge("x", "y", EdgeKind::OnChainVote).is_some()
            && out.network.edge("y", "x", EdgeKind::OnChainVote).is_some(),
        "cycle edges missing"
    );

    let took = within(Duration::from_secs(5), started)?;
    Ok(format!("scanned a, b, c; d is a frontier vertex; cycle stopped after {} rounds; {took:?}", out.rounds.len()))
}

fn property_suites() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d65_7461);
    for i in 0..1000 {
        let (name, params, canonical) = random_signature(&mut rng);
        let sig = CanonicalSignature::new(&name, &params).map_err(|e| format!("signature {i} {canonical}: {e}"))?;
        ensure!(sig.canonical() == canonical, "signature {i}: {} != {canonical}", sig.canonical());
        ensure!(*sig.topic_hash().as_bytes() == oracle_keccak(canonical.as_bytes()), "hash mismatch for {canonical}");
    }

    for i in 0..500 {
        let ev = random_event(&mut rng);
        let (topics, data) = encode_event(&ev.layout, &ev.values).map_err(|e| format!("event {i}: {e}"))?;
        let log = EventLogRecord {
            emitter: Address::from_low_u64(1),
            topics,
            data,
            block_number: i,
            tx_index: 0,
            log_index: 0,
        };
        let decoded = decode_event(&log, &ev.layout).map_err(|e| format!("event {i} {}: {e}", ev.layout.signature))?;
        let values: Vec<_> = decoded.values.into_iter().map(|(_, v)| v).collect();
        ensure!(values == ev.expected, "event {i} {} did not round-trip", ev.layout.signature);
    }

    for i in 0..500 {
        let mut data = vec![0u8; 32 * rng.gen_range(0..12) + rng.gen_range(0..32)];
        for chunk in data.chunks_mut(32) {
            match rng.gen_range(0..3) {
                0 => {
                    let from = chunk.len().saturating_sub(20);
                    rng.fill(&mut chunk[from..]);
                }
                1 => rng.fill(chunk),
                _ => {}
            }
        }
        for a in scavenge_addresses(&data) {
            ensure!(!a.is_zero(), "payload {i}: zero address");
            let word = data
                .chunks_exact(32)
                .find(|w| w[12..] == a.as_bytes()[..])
                .ok_or(format!("payload {i}: {a} not a word"))?;
            ensure!(word[..12] == [0u8; 12], "payload {i}: {a} not zero-padded");
        }
    }

    let exports = || -> Result<Vec<String>, String> {
        let net = run_world(&scenarios::metaverse(), 3)?.network;
        Ok([ExportFormat::Json, ExportFormat::GraphMl, ExportFormat::Dot]
            .into_iter()
            .map(|f| export(&net, f))
            .collect())
    };
    ensure!(exports()? == exports()?, "exports differ between runs");
    Ok("1000 topic hashes match keccak oracle; 500 events round-trip; scavenging sound; exports byte-identical".into())
}

fn hermetic_run() -> Check {
    let world = scenarios::metaverse();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    world.write_dir(dir.path()).map_err(|e| e.to_string())?;
    let expected = run_world(&world, 3)?.network;

    let endpoints = Endpoints::new("http://127.0.0.1:9");
    let overrides = LocalOverrides::load(&dir.path().join(OVERRIDES_FILE)).map_err(|e| e.to_string())?;
    let directory = DaoDirectory::new(world.directory.clone());
    let journal = dir.path().join("journal.jsonl");
    let run = |transport: Arc<dyn Transport>, range: ScanRange| {
        Pipeline::new(Sources::remote(&endpoints, transport, overrides.clone()), range)
            .with_directory(directory.clone())
            .run(&world.seed, 3)
    };

    let services = FixtureServices::load(dir.path(), &endpoints).map_err(|e| e.to_string())?;
    let recorder = RecordingTransport::new(services, &journal).map_err(|e| e.to_string())?;
    let recorded = run(Arc::new(recorder), world.range()).map_err(|e| e.to_string())?;
    ensure!(recorded.network == expected, "recorded run differs from direct fixture run");

    let replay = |path: &Path| ReplayTransport::open(path).map_err(|e| e.to_string());
    let replayed = run(Arc::new(replay(&journal)?), world.range()).map_err(|e| e.to_string())?;
    ensure!(replayed.network == expected, "replayed run differs");

    let shifted = ScanRange::new(1, world.range().end_block)?;
    match run(Arc::new(replay(&journal)?), shifted) {
        Ok(_) => return Err("replay with unrecorded requests succeeded".into()),
        Err(e) => ensure!(e.to_string().contains("replay miss"), "unexpected error {e}"),
    }
    let text = std::fs::read_to_string(&journal).map_err(|e| e.to_string())?;
    let kept: Vec<&str> = text.lines().take(text.lines().count() - 1).collect();
    let truncated = dir.path().join("truncated.jsonl");
    std::fs::write(&truncated, kept.join("\n") + "\n").map_err(|e| e.to_string())?;
    ensure!(run(Arc::new(replay(&truncated)?), world.range()).is_err(), "run with a truncated journal succeeded");
    Ok(format!("{} exchanges replayed offline; any replay miss fails the run", text.lines().count()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("governor detection", governor_detection),
        ("voting event and contract voters", voting_event_and_contract_voters),
        ("decisive vote", decisive_vote),
        ("voting-power share", voting_power_share),
        ("delegation funnel", delegation_funnel),
        ("snapshot resolution", snapshot_resolution),
        ("bounded expansion", bounded_expansion),
        ("property suites", property_suites),
        ("hermetic run", hermetic_run),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("PASS {}. {name}: {detail}", n + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}. {name}: {why}", n + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
