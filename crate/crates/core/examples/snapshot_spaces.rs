//! Indexes Snapshot spaces by the addresses their strategies reference and
//! resolves a token to its space.
//!
//! ```bash
//! cargo run --example snapshot_spaces
//! ```

use metagov::scenarios;
use metagov::snapshotio::{load_space_index, resolve_space, MIN_FOLLOWERS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let case = scenarios::snapshot_boundary();
    let index = load_space_index(&case.snapshot)?;
    println!("{} spaces, {} indexed addresses", index.space_count(), index.len());

    for (what, address) in
        [("at threshold", case.at_threshold), ("below threshold", case.below_threshold), ("contested", case.contested)]
    {
        let spaces: Vec<String> = index.lookup(address).iter().map(|s| format!("{}({})", s.id, s.followers)).collect();
        let chosen = resolve_space(&index, address).map(|s| s.id.as_str());
        println!("{what:<16} candidates {spaces:?} -> {chosen:?} (min {MIN_FOLLOWERS} followers)");
    }
    Ok(())
}
