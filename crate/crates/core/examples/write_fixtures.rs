//! Writes a fixture world to disk for the `metagov` command line.
//!
//! ```bash
//! cargo run --example write_fixtures -- fixtures/
//! cargo run -- --fixtures fixtures seed -f fixtures/daos.csv --directory fixtures/directory.csv
//! cargo run -- --fixtures fixtures expand --depth 3
//! cargo run -- graph -o network.graphml --format graphml
//! cargo run -- report shares
//! ```

use std::path::PathBuf;

use metagov::scenarios;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "fixtures".into()));
    let world = match args.next().as_deref() {
        None | Some("metaverse") => scenarios::metaverse(),
        Some("chain") => scenarios::expansion_chain(),
        Some("cycle") => scenarios::expansion_cycle(),
        Some("convex") => scenarios::convex_star(),
        Some("compound") => scenarios::compound_proposal_100().world,
        Some("aave") => scenarios::liquity_on_aave().world,
        Some("funnel") => scenarios::delegation_funnel().world,
        Some(other) => return Err(format!("unknown world {other:?}").into()),
    };
    world.write_dir(&dir)?;
    let range = world.range();
    println!(
        "wrote {} (blocks {}:{}, {} seed DAOs, {} listed)",
        dir.display(),
        range.start_block,
        range.end_block,
        world.seed.len(),
        world.directory.len()
    );
    Ok(())
}
