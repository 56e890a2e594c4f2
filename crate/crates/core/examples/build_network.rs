//! Runs the whole pipeline over a fixture world: scans the seed DAOs,
//! expands through discovered DAOs and exports the resulting graph.
//!
//! ```bash
//! cargo run --example build_network -- out/
//! ```

use std::path::PathBuf;

use metagov::metanet::{export, ExportFormat};
use metagov::pipeline::{DaoDirectory, Pipeline, Sources};
use metagov::scenarios;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out_dir = std::env::args().nth(1).map(PathBuf::from);
    let world = scenarios::metaverse();
    let fixtures = tempfile::tempdir()?;
    world.write_dir(fixtures.path())?;

    let mut pipeline = Pipeline::new(Sources::from_fixture_dir(fixtures.path())?, world.range())
        .with_directory(DaoDirectory::new(world.directory.clone()));
    let out = pipeline.run(&world.seed, 3)?;

    for round in &out.rounds {
        println!(
            "round {}: scanned {:?}, leaves {}, discovered {:?}",
            round.depth,
            round.scanned,
            round.leaves.len(),
            round.discovered
        );
    }
    let net = &out.network;
    println!("{} vertices, {} edges", net.vertex_count(), net.edge_count());
    for e in net.edges() {
        println!("  {:<12} -> {:<10} {:?} x{}", e.source, e.target, e.kind, e.evidence.len());
    }

    match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(&dir)?;
            for (format, name) in [
                (ExportFormat::Json, "network.json"),
                (ExportFormat::GraphMl, "network.graphml"),
                (ExportFormat::Dot, "network.dot"),
            ] {
                std::fs::write(dir.join(name), export(net, format))?;
            }
            println!("wrote exports to {}", dir.display());
        }
        None => print!("{}", export(net, ExportFormat::Dot)),
    }
    Ok(())
}
