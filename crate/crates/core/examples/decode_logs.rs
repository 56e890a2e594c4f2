//! Decodes governor event logs with the contract's ABI and recovers
//! addresses from undecodable payloads.
//!
//! ```bash
//! cargo run --example decode_logs
//! ```

use metagov::abidec::{decode_event, layout_from_abi, scavenge_addresses, AbiValue};
use metagov::chainio::{fetch_contract_metadata, ChainSource};
use metagov::scenarios;

fn render(value: &AbiValue) -> String {
    match value {
        AbiValue::Uint(w) => w.to_decimal(),
        AbiValue::Int(w) => w.to_signed_decimal(),
        AbiValue::Address(a) => a.to_string(),
        AbiValue::String(s) => format!("{s:?}"),
        other => format!("{other:?}"),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let case = scenarios::voting_governor();
    let meta = fetch_contract_metadata(&case.chain, case.governor)?;
    let abi = meta.abi.ok_or("governor has no ABI")?;
    let layouts = layout_from_abi(&abi)?;
    for l in &layouts {
        println!("{} {}", l.topic, l.signature);
    }

    let logs = case.chain.logs(case.governor, case.range, None)?;
    for log in logs.iter().filter(|l| l.topic0() == Some(case.vote_topic)).take(3) {
        let layout = layouts.iter().find(|l| Some(l.topic) == log.topic0()).ok_or("no layout")?;
        let event = decode_event(log, layout)?;
        println!("block {} {}", log.block_number, event.layout.signature.name());
        for (name, value) in &event.values {
            println!("  {name} = {}", render(value));
        }
    }

    // Without a layout, address-shaped words still surface who was involved.
    let created = logs.iter().find(|l| l.topic0().is_some_and(|t| t != case.vote_topic)).ok_or("no other log")?;
    let words = scavenge_addresses(&created.data);
    // Offsets and small integers are address-shaped too.
    let plausible: Vec<_> = words.iter().filter(|a| a.as_bytes()[..8] != [0; 8]).collect();
    println!(
        "undecoded {}-byte payload: {} candidate words, plausible {:?}",
        created.data.len(),
        words.len(),
        plausible
    );
    let anonymous = logs.iter().filter(|l| l.topics.is_empty()).count();
    println!("{anonymous} topicless logs skipped");
    Ok(())
}
