mod common;

use std::collections::BTreeSet;

use metagov::abidec::{decode, decode_event, encode, encode_event, scavenge_addresses};
use metagov::chainio::ScanRange;
use metagov::metanet::{export, EdgeKind, EvidenceRef, ExportFormat, MetagovNetwork};
use metagov::model::{Address, CanonicalSignature, DaoIdentity, EventLogRecord};
use metagov::scenarios::{self, named, tokens, GovernorStyle, World};
use metagov::sigstore::{KeywordPolicy, SignatureStore};
use metagov::voterscan::VoterScanner;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn topic_hash_matches_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (name, params, canonical) = random_signature(&mut rng);
        let sig = CanonicalSignature::new(&name, &params).unwrap();
        prop_assert_eq!(sig.canonical(), canonical.clone());
        prop_assert_eq!(*sig.topic_hash().as_bytes(), oracle_keccak(canonical.as_bytes()));
        let reparsed: CanonicalSignature = canonical.parse().unwrap();
        prop_assert_eq!(reparsed, sig);
    }

    #[test]
    fn tuple_encoding_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let types: Vec<_> = (0..rng.gen_range(0..6)).map(|_| random_type(&mut rng, 2)).collect();
        let values: Vec<_> = types.iter().map(|t| random_value(&mut rng, t)).collect();
        let bytes = encode(&types, &values).unwrap();
        prop_assert_eq!(bytes.len() % 32, 0);
        prop_assert_eq!(decode(&types, &bytes).unwrap(), values);
    }

    #[test]
    fn event_encoding_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ev = random_event(&mut rng);
        let (topics, data) = encode_event(&ev.layout, &ev.values).unwrap();
        prop_assert_eq!(topics.len(), 1 + ev.layout.indexed_count());
        let log = EventLogRecord { emitter: Address::from_low_u64(7), topics, data, block_number: 1, tx_index: 0, log_index: 0 };
        let decoded = decode_event(&log, &ev.layout).unwrap();
        let values: Vec<_> = decoded.values.into_iter().map(|(_, v)| v).collect();
        prop_assert_eq!(values, ev.expected);
    }

    #[test]
    fn decoding_garbage_never_panics(types_seed in any::<u64>(), data in proptest::collection::vec(any::<u8>(), 0..400)) {
        let mut rng = ChaCha8Rng::seed_from_u64(types_seed);
        let types: Vec<_> = (0..rng.gen_range(1..4)).map(|_| random_type(&mut rng, 2)).collect();
        let _ = decode(&types, &data);
    }

    #[test]
    fn scavenged_words_are_padded_nonzero_addresses(
        words in proptest::collection::vec(
            prop_oneof![
                any::<[u8; 20]>().prop_map(|a| { let mut w = [0u8; 32]; w[12..].copy_from_slice(&a); w }),
                any::<[u8; 32]>(),
                Just([0u8; 32]),
            ],
            0..16,
        ),
        tail in proptest::collection::vec(any::<u8>(), 0..32),
    ) {
        let mut data: Vec<u8> = words.iter().flatten().copied().collect();
        data.extend(&tail);
        let found = scavenge_addresses(&data);
        let expected: Vec<Address> = words
            .iter()
            .filter(|w| w[..12] == [0u8; 12] && w[12..] != [0u8; 20])
            .map(|w| Address::new(w[12..].try_into().unwrap()))
            .collect();
        prop_assert_eq!(&found, &expected);
        prop_assert!(found.iter().all(|a| !a.is_zero()));
    }

    #[test]
    fn exports_ignore_insertion_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ids = ["aave", "compound", "uniswap", "index", "0x00000000000000000000000000000000000000aa", "gnosis dao"];
        let identity = |id: &str| DaoIdentity::inferred(id, &id.to_uppercase());
        let kinds = [EdgeKind::OnChainVote, EdgeKind::OffChainVote, EdgeKind::Delegation];
        let mut adds = Vec::new();
        for _ in 0..rng.gen_range(1..30) {
            let s = *ids.choose(&mut rng).unwrap();
            let t = *ids.iter().filter(|i| **i != s).collect::<Vec<_>>().choose(&mut rng).unwrap();
            let ev = EvidenceRef::Vote {
                governor: Address::from_low_u64(rng.gen_range(1..4)),
                voter: Address::from_low_u64(rng.gen_range(1..50)),
                proposal_id: Some(rng.gen_range(1..5u32).to_string()),
                block: rng.gen_range(0..1000),
                tx: 0,
                log: rng.gen_range(0..3),
            };
            adds.push((s, *t, *kinds.choose(&mut rng).unwrap(), ev));
        }
        let build = |order: &[(&str, &str, EdgeKind, EvidenceRef)]| {
            let mut net = MetagovNetwork::new();
            for (s, t, k, ev) in order {
                net.add_edge(identity(s), identity(t), *k, vec![ev.clone()]).unwrap();
            }
            net
        };
        let a = build(&adds);
        adds.shuffle(&mut rng);
        let b = build(&adds);
        for format in [ExportFormat::Json, ExportFormat::GraphMl, ExportFormat::Dot] {
            prop_assert_eq!(export(&a, format), export(&b, format));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn vote_scan_agrees_with_emitted_votes(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = World::new();
        let dao = w.governed_dao("prop", if rng.gen() { GovernorStyle::Bravo } else { GovernorStyle::AaveV2 });
        w.propose(&dao, 1);
        let mut contracts = BTreeSet::new();
        let votes = rng.gen_range(2..40);
        for i in 0..votes {
            let voter = if rng.gen_bool(0.3) {
                let c = w.contract(&format!("contract voter {}", rng.gen_range(0..6)));
                contracts.insert(c);
                c
            } else {
                named(&format!("eoa voter {i}"))
            };
            w.vote(&dao, voter, 1, rng.gen_range(0..3), tokens(rng.gen_range(1..1000)));
        }
        let store = SignatureStore::with_builtin();
        let policy = KeywordPolicy::default();
        let scanner = VoterScanner::new(&w.chain, &store, &policy);
        let governor = dao.governor.unwrap();
        let range: ScanRange = w.range();
        let scan = scanner.extract_vote_records(governor, range).unwrap();
        prop_assert_eq!(scan.records.len(), votes);
        prop_assert!(scan.failures.is_empty());
        prop_assert_eq!(scan.contract_voters(), contracts.clone());
        prop_assert_eq!(scanner.identify_multisig_voters(governor, range).unwrap(), contracts);
        let positions: Vec<_> = scan.records.iter().map(|r| (r.block_number, r.tx_index, r.log_index)).collect();
        prop_assert!(positions.windows(2).all(|p| p[0] < p[1]));
    }
}

#[test]
fn pipeline_exports_are_byte_identical_across_runs() {
    let run = || {
        let world = scenarios::metaverse();
        let dir = tempfile::tempdir().unwrap();
        world.write_dir(dir.path()).unwrap();
        let sources = metagov::pipeline::Sources::from_fixture_dir(dir.path()).unwrap();
        let mut p = metagov::pipeline::Pipeline::new(sources, world.range())
            .with_directory(metagov::pipeline::DaoDirectory::new(world.directory.clone()));
        let net = p.run(&world.seed, 3).unwrap().network;
        [ExportFormat::Json, ExportFormat::GraphMl, ExportFormat::Dot].map(|f| export(&net, f))
    };
    assert_eq!(run(), run());
}
