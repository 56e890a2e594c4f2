//! Resolves token delegations and folds them into Delegation edges.
//!
//! ```bash
//! cargo run --example resolve_delegations
//! ```

use metagov::pipeline::{DaoDirectory, Pipeline, Sources};
use metagov::scenarios;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let case = scenarios::delegation_funnel();
    let dir = tempfile::tempdir()?;
    case.world.write_dir(dir.path())?;

    let mut pipeline = Pipeline::new(Sources::from_fixture_dir(dir.path())?, case.world.range())
        .with_directory(DaoDirectory::new(case.world.directory.clone()));
    let out = pipeline.run(&case.world.seed, 0)?;

    let scan = &out.scans[0];
    let contract_side =
        scan.delegations.iter().filter(|d| d.delegator_kind.is_contract() || d.delegate_kind.is_contract());
    println!("{} delegation events, {} involve a contract", scan.delegations.len(), contract_side.count());

    let f = out.funnel;
    println!(
        "funnel: total={} self={} non_self={} pairs={} active={} new={}",
        f.total,
        f.self_delegations,
        f.non_self(),
        f.distinct_dao_pairs,
        f.active,
        f.new_edges
    );
    for e in out.network.edges().filter(|e| e.kind == metagov::metanet::EdgeKind::Delegation) {
        println!("  {} -> {} ({} records)", e.source, e.target, e.evidence.len());
    }
    Ok(())
}
