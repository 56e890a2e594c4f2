//! Finds the governance contract behind a voting-power token.
//!
//! ```bash
//! cargo run --example detect_governor
//! ```

use metagov::govscan::{GovernanceDetection, GovernanceScanner};
use metagov::scenarios;
use metagov::sigstore::{KeywordPolicy, SignatureStore};

fn show(title: &str, found: &GovernanceDetection) {
    println!("{title}: chosen {:?}", found.chosen);
    for c in &found.candidates {
        println!("  {} calls={:<5} keywords={:?}", c.address, c.invocation_count, c.matched_keywords);
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let store = SignatureStore::with_builtin();
    let policy = KeywordPolicy::default();

    // A token called by a governor, a busy router and an unverified bot.
    let case = scenarios::governor_token();
    let found = GovernanceScanner::new(&case.chain, &store, &policy).identify(case.token, case.chain.full_range())?;
    show("governor-token", &found);
    println!("  expected {}", case.governor);

    // The heaviest keyword-qualified caller is a staking locker while
    // real decisions happen off-chain.
    let case = scenarios::locker_shadow();
    let found = GovernanceScanner::new(&case.chain, &store, &policy).identify(case.token, case.chain.full_range())?;
    show("locker-shadow", &found);
    println!("  locker {}, governance lives in {}", case.locker, case.snapshot_space);
    println!("{}", found.to_json());
    Ok(())
}
