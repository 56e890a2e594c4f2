//! Builds a signature store from text dumps, looks up topics and
//! selectors, and classifies a contract by keyword.
//!
//! ```bash
//! cargo run --example signature_store
//! ```

use metagov::model::CanonicalSignature;
use metagov::sigstore::{
    classify_governance, find_delegation_signatures, KeywordPolicy, SignatureKind, SignatureStore,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut store = SignatureStore::new();
    let dump = [
        "VoteCast(address,uint256,uint8,uint256,string)",
        "ProposalCreated(uint256,address,address[],uint256[],string[],bytes[],uint256,uint256,string)",
        "DelegateChanged(address,address,address)",
        "Transfer(address,address,uint256)",
        "not a signature",
        "Broken(uint257)",
    ];
    let report = store.ingest_dump(dump, SignatureKind::Event, "example");
    println!("added {}, rejected {}", report.added, report.failures.len());
    for f in &report.failures {
        println!("  line {}: {:?} ({})", f.line, f.text, f.reason);
    }

    let vote = CanonicalSignature::new("VoteCast", ["address", "uint256", "uint8", "uint256", "string"])?;
    println!("{} -> {}", vote.canonical(), vote.topic_hash());
    for hit in store.lookup_topic(&vote.topic_hash()) {
        println!("  found {} from {}", hit.canonical.canonical(), hit.source);
    }

    store.ingest_dump(["castVote(uint256,uint8)", "transfer(address,uint256)"], SignatureKind::Function, "example");
    let transfer = CanonicalSignature::new("transfer", ["address", "uint256"])?;
    let names: Vec<String> =
        store.lookup_selector(transfer.topic_hash().selector()).iter().map(|e| e.canonical.canonical()).collect();
    println!("selector 0x{} -> {names:?}", hex::encode(transfer.topic_hash().selector()));

    let policy = KeywordPolicy::default();
    let entries: Vec<_> = store.iter().cloned().collect();
    println!("{} entries, {} builtin", entries.len(), SignatureStore::with_builtin().len());
    println!("governance contract: {}", classify_governance(&entries, &policy));
    for d in find_delegation_signatures(&entries, &policy) {
        println!("delegation event: {}", d.canonical.canonical());
    }
    Ok(())
}
