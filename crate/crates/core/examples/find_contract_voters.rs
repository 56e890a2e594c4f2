//! Picks a governor's voting event and lists the contracts that voted.
//!
//! ```bash
//! cargo run --example find_contract_voters
//! ```

use metagov::scenarios;
use metagov::sigstore::{KeywordPolicy, SignatureStore};
use metagov::voterscan::VoterScanner;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let case = scenarios::voting_governor();
    let store = SignatureStore::with_builtin();
    let policy = KeywordPolicy::default();
    let scanner = VoterScanner::new(&case.chain, &store, &policy);

    let selection = scanner.select_voting_event(case.governor, case.range)?;
    println!("voting event {:?} over {} logs", selection.topic, selection.total_logs());
    if let Some(layout) = &selection.layout {
        println!("  decoded as {}", layout.signature.canonical());
    }
    for (topic, count) in &selection.frequency_table {
        println!("  {topic} x{count}");
    }

    let scan = scanner.extract_vote_records(case.governor, case.range)?;
    println!("{} vote records, {} undecodable", scan.records.len(), scan.failures.len());

    let voters = scanner.identify_multisig_voters(case.governor, case.range)?;
    for v in &voters {
        let mark = if case.contract_voters.contains(v) { "expected" } else { "unexpected" };
        println!("  contract voter {v} ({mark})");
    }
    println!("retired contract {} counted: {}", case.retired, voters.contains(&case.retired));
    Ok(())
}
