//! Labels contract voters from overrides, name tags and Snapshot
//! treasuries, then groups them by DAO.
//!
//! ```bash
//! cargo run --example label_accounts
//! ```

use std::collections::BTreeSet;

use metagov::labeler::{group_by_dao, Labeler};
use metagov::scenarios::{self, named};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Most contract voters carry no public name tag.
    let (voters, tags) = scenarios::label_population(663, 42);
    let labeler = Labeler::new().with_tags(tags);
    let records = labeler.label_accounts(&voters.iter().copied().collect())?;
    let labelled = records.iter().filter(|r| r.is_labelled()).count();
    println!(
        "{labelled} of {} contract voters labelled ({:.1}%)",
        records.len(),
        100.0 * labelled as f64 / records.len() as f64
    );
    let named_only: Vec<_> = records.iter().filter(|r| r.is_labelled()).cloned().collect();
    println!(
        "{} DAOs among the labelled, {} groups overall",
        group_by_dao(&named_only).len(),
        group_by_dao(&records).len()
    );

    // A local override beats the public tag of the same address.
    let world = scenarios::metaverse();
    let treasury = named("index treasury");
    let labeler = Labeler::new().with_overrides(world.overrides.clone()).with_tags(world.tags.clone());
    let wanted: BTreeSet<_> = [treasury, named("liquity bounties"), named("nobody")].into_iter().collect();
    for r in labeler.label_accounts(&wanted)? {
        println!("  {} tag={:?} dao={:?} via {:?}", r.address, r.tag, r.dao_id, r.source);
    }
    Ok(())
}
