//! Records every HTTP exchange of a run into a journal, then replays the
//! run offline. A request missing from the journal aborts the replay.
//!
//! ```bash
//! cargo run --example record_replay
//! ```

use std::sync::Arc;

use metagov::chainio::{RecordingTransport, ReplayTransport, ScanRange, Transport};
use metagov::labeler::LocalOverrides;
use metagov::pipeline::{DaoDirectory, Endpoints, FixtureServices, Pipeline, Sources, OVERRIDES_FILE};
use metagov::scenarios;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let world = scenarios::metaverse();
    let dir = tempfile::tempdir()?;
    world.write_dir(dir.path())?;
    let endpoints = Endpoints::new("http://localhost:8545");
    let overrides = LocalOverrides::load(&dir.path().join(OVERRIDES_FILE))?;
    let directory = DaoDirectory::new(world.directory.clone());
    let journal = dir.path().join("journal.jsonl");

    // JSON-RPC, explorer and hub requests answered from the fixture files.
    let services = FixtureServices::load(dir.path(), &endpoints)?;
    let recorder: Arc<dyn Transport> = Arc::new(RecordingTransport::new(services, &journal)?);
    let recorded = Pipeline::new(Sources::remote(&endpoints, recorder, overrides.clone()), world.range())
        .with_directory(directory.clone())
        .run(&world.seed, 3)?;
    println!("recorded run: {} vertices, {} edges", recorded.network.vertex_count(), recorded.network.edge_count());

    let replay = ReplayTransport::open(&journal)?;
    println!("journal holds {} exchanges", replay.len());
    let replayed = Pipeline::new(Sources::remote(&endpoints, Arc::new(replay), overrides.clone()), world.range())
        .with_directory(directory.clone())
        .run(&world.seed, 3)?;
    println!("replayed run matches: {}", replayed.network == recorded.network);

    // A different block range issues requests that were never recorded.
    let shifted = ScanRange::new(1, world.range().end_block)?;
    let replay: Arc<dyn Transport> = Arc::new(ReplayTransport::open(&journal)?);
    match Pipeline::new(Sources::remote(&endpoints, replay, overrides), shifted)
        .with_directory(directory)
        .run(&world.seed, 3)
    {
        Ok(_) => println!("unexpected: replay with a new range succeeded"),
        Err(e) => println!("replay with a new range fails: {e}"),
    }
    Ok(())
}
