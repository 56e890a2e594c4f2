//! Reports over scanned DAOs: decisive votes, voting-power shares,
//! proposal mentions against actual votes, and degree rankings.
//!
//! ```bash
//! cargo run --example case_studies
//! ```

use metagov::metanet::{decisive_report, degree_report, mention_report, share_report, MentionTarget, SimpleMajority};
use metagov::pipeline::{DaoDirectory, Pipeline, RunOutput, Sources};
use metagov::scenarios::{self, World, TOKEN_UNIT};
use metagov::snapshotio::SnapshotSource;

fn run(world: &World, depth: u32) -> Result<RunOutput, Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    world.write_dir(dir.path())?;
    let mut pipeline = Pipeline::new(Sources::from_fixture_dir(dir.path())?, world.range())
        .with_directory(DaoDirectory::new(world.directory.clone()));
    Ok(pipeline.run(&world.seed, depth)?)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A university multisig decides a Compound proposal.
    let case = scenarios::compound_proposal_100();
    let out = run(&case.world, 0)?;
    let wanted = case.proposal.to_string();
    let votes: Vec<_> =
        out.scans[0].votes.iter().filter(|v| v.proposal_id.as_deref() == Some(wanted.as_str())).cloned().collect();
    let report = decisive_report(&votes, &SimpleMajority);
    let t = &report.tally;
    println!(
        "compound #{}: for {} against {} abstain {} -> {:?}",
        case.proposal,
        t.for_votes / TOKEN_UNIT,
        t.against_votes / TOKEN_UNIT,
        t.abstain_votes / TOKEN_UNIT,
        report.outcome
    );
    if let (Some(voter), Some(weight)) = (report.pivotal_voter, report.pivotal_weight) {
        println!("  pivotal {voter} with {}; removing it flips the outcome: {}", weight / TOKEN_UNIT, report.flipped);
    }

    // A treasury voting for its own listing.
    let case = scenarios::liquity_on_aave();
    let out = run(&case.world, 0)?;
    let votes: Vec<_> = out.scans.iter().flat_map(|s| s.votes.iter().cloned()).collect();
    for row in share_report(&out.network, &votes).rows {
        println!(
            "{} in {} #{}: {} of {} = {:.3} flagged={}",
            row.source,
            row.target,
            row.proposal_id,
            row.voter_weight / TOKEN_UNIT,
            row.total_weight / TOKEN_UNIT,
            row.share,
            row.flagged
        );
    }

    // Index Coop talks about other DAOs more than it votes in them.
    let world = scenarios::metaverse();
    let out = run(&world, 3)?;
    let proposals = world.snapshot.proposals("index-coop.eth")?;
    let targets = [("aave", "Aave"), ("compound", "Compound"), ("uniswap", "Uniswap")]
        .map(|(id, name)| MentionTarget { dao_id: id.into(), names: vec![name.into()] });
    for row in mention_report(&out.network, "index", &proposals, &targets) {
        println!(
            "index -> {:<9} mentioned in {} proposals, voted {} times",
            row.target, row.mention_count, row.vote_count
        );
    }

    // Many treasuries voting in one Snapshot space.
    let out = run(&scenarios::convex_star(), 0)?;
    for row in degree_report(&out.network).iter().take(3) {
        println!("{:<14} in={} out={}", row.dao_id, row.in_degree, row.out_degree);
    }
    Ok(())
}
