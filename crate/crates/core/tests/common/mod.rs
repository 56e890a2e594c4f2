//! Independent oracles and random generators shared by the integration
//! tests.

#![allow(dead_code)]

use metagov::abidec::{AbiType, AbiValue, EventLayout, Word};
use metagov::model::{Address, TopicHash};
use rand::seq::SliceRandom;
use rand::Rng;
use sha3::{Digest, Keccak256};

pub fn oracle_keccak(data: &[u8]) -> [u8; 32] {
    Keccak256::digest(data).into()
}

const NAME_CHARS: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_";

pub fn random_ident<R: Rng>(rng: &mut R) -> String {
    let first = NAME_CHARS[rng.gen_range(0..52)] as char;
    let len = rng.gen_range(0..12);
    std::iter::once(first).chain((0..len).map(|_| NAME_CHARS[rng.gen_range(0..NAME_CHARS.len())] as char)).collect()
}

/// A type as it might be written in a dump, and its canonical spelling,
/// built without the library's own type printer.
pub fn random_type_text<R: Rng>(rng: &mut R, depth: u32) -> (String, String) {
    let pick = rng.gen_range(0..if depth == 0 { 9 } else { 11 });
    let (written, canonical) = match pick {
        0 => ("address".into(), "address".into()),
        1 => ("bool".into(), "bool".into()),
        2 => ("string".into(), "string".into()),
        3 => ("bytes".into(), "bytes".into()),
        4 => ("uint".into(), "uint256".into()),
        5 => ("int".into(), "int256".into()),
        6 => {
            let bits = 8 * rng.gen_range(1..=32);
            (format!("uint{bits}"), format!("uint{bits}"))
        }
        7 => {
            let bits = 8 * rng.gen_range(1..=32);
            (format!("int{bits}"), format!("int{bits}"))
        }
        8 => {
            let n = rng.gen_range(1..=32);
            (format!("bytes{n}"), format!("bytes{n}"))
        }
        9 => {
            let (w, c) = random_type_text(rng, depth - 1);
            if rng.gen_bool(0.5) {
                (format!("{w}[]"), format!("{c}[]"))
            } else {
                let n = rng.gen_range(1..=4);
                (format!("{w}[{n}]"), format!("{c}[{n}]"))
            }
        }
        _ => {
            let members: Vec<(String, String)> =
                (0..rng.gen_range(1..=3)).map(|_| random_type_text(rng, depth - 1)).collect();
            let w: Vec<_> = members.iter().map(|m| m.0.clone()).collect();
            let c: Vec<_> = members.iter().map(|m| m.1.clone()).collect();
            (format!("({})", w.join(",")), format!("({})", c.join(",")))
        }
    };
    (written, canonical)
}

/// A random signature: name, parameter spellings, canonical text.
pub fn random_signature<R: Rng>(rng: &mut R) -> (String, Vec<String>, String) {
    let name = random_ident(rng);
    let params: Vec<(String, String)> = (0..rng.gen_range(0..6)).map(|_| random_type_text(rng, 2)).collect();
    let canonical = format!("{name}({})", params.iter().map(|p| p.1.as_str()).collect::<Vec<_>>().join(","));
    (name, params.into_iter().map(|p| p.0).collect(), canonical)
}

pub fn random_type<R: Rng>(rng: &mut R, depth: u32) -> AbiType {
    AbiType::parse(&random_type_text(rng, depth).1).expect("generated types parse")
}

fn random_word<R: Rng>(rng: &mut R, bits: u16, signed: bool) -> Word {
    let mut w = [0u8; 32];
    let bytes = (bits / 8) as usize;
    rng.fill(&mut w[32 - bytes..]);
    if signed && w[32 - bytes] & 0x80 != 0 {
        w[..32 - bytes].fill(0xff);
    }
    Word(w)
}

pub fn random_value<R: Rng>(rng: &mut R, ty: &AbiType) -> AbiValue {
    match ty {
        AbiType::Address => AbiValue::Address(Address::new(rng.gen())),
        AbiType::Bool => AbiValue::Bool(rng.gen()),
        AbiType::Uint(bits) => AbiValue::Uint(random_word(rng, *bits, false)),
        AbiType::Int(bits) => AbiValue::Int(random_word(rng, *bits, true)),
        AbiType::FixedBytes(n) => AbiValue::FixedBytes((0..*n).map(|_| rng.gen()).collect()),
        AbiType::Bytes => AbiValue::Bytes((0..rng.gen_range(0..70)).map(|_| rng.gen()).collect()),
        AbiType::String => {
            let alphabet = ['a', 'Z', '0', ' ', '_', 'é', 'ß', '漢', '🗳'];
            AbiValue::String((0..rng.gen_range(0..40)).map(|_| *alphabet.choose(rng).expect("non-empty")).collect())
        }
        AbiType::Array(inner) => AbiValue::Array((0..rng.gen_range(0..4)).map(|_| random_value(rng, inner)).collect()),
        AbiType::FixedArray(inner, n) => AbiValue::Array((0..*n).map(|_| random_value(rng, inner)).collect()),
        AbiType::Tuple(members) => AbiValue::Tuple(members.iter().map(|m| random_value(rng, m)).collect()),
    }
}

/// The 32-byte head word of a static elementary value.
pub fn oracle_word(value: &AbiValue) -> [u8; 32] {
    let mut w = [0u8; 32];
    match value {
        AbiValue::Address(a) => w[12..].copy_from_slice(a.as_bytes()),
        AbiValue::Bool(b) => w[31] = u8::from(*b),
        AbiValue::Uint(x) | AbiValue::Int(x) => w = x.0,
        AbiValue::FixedBytes(b) => w[..b.len()].copy_from_slice(b),
        other => panic!("not a static elementary value: {other:?}"),
    }
    w
}

fn is_static_elementary(ty: &AbiType) -> bool {
    matches!(ty, AbiType::Address | AbiType::Bool | AbiType::Uint(_) | AbiType::Int(_) | AbiType::FixedBytes(_))
}

fn indexable(ty: &AbiType) -> bool {
    match ty {
        AbiType::String | AbiType::Bytes => true,
        AbiType::Array(inner) | AbiType::FixedArray(inner, _) => is_static_elementary(inner),
        t => is_static_elementary(t),
    }
}

/// What decoding an indexed parameter can recover.
fn indexed_expectation(ty: &AbiType, value: &AbiValue) -> AbiValue {
    let hashed = |bytes: &[u8]| AbiValue::Hashed(TopicHash::new(oracle_keccak(bytes)));
    match (ty, value) {
        (AbiType::String, AbiValue::String(s)) => hashed(s.as_bytes()),
        (AbiType::Bytes, AbiValue::Bytes(b)) => hashed(b),
        (AbiType::Array(_) | AbiType::FixedArray(..), AbiValue::Array(items)) => {
            hashed(&items.iter().flat_map(oracle_word).collect::<Vec<u8>>())
        }
        _ => value.clone(),
    }
}

pub struct RandomEvent {
    pub layout: EventLayout,
    pub values: Vec<AbiValue>,
    /// Values decoding should yield, indexed dynamic ones as hashes.
    pub expected: Vec<AbiValue>,
}

pub fn random_event<R: Rng>(rng: &mut R) -> RandomEvent {
    let mut decl = Vec::new();
    let mut values = Vec::new();
    let mut expected = Vec::new();
    let mut indexed = 0;
    for i in 0..rng.gen_range(0..7) {
        // Event layouts accept one level of array or tuple nesting.
        let ty = random_type(rng, 1);
        let value = random_value(rng, &ty);
        let is_indexed = indexed < 3 && indexable(&ty) && rng.gen_bool(0.4);
        if is_indexed {
            indexed += 1;
            expected.push(indexed_expectation(&ty, &value));
            decl.push(format!("{} indexed p{i}", ty.canonical()));
        } else {
            expected.push(value.clone());
            decl.push(format!("{} p{i}", ty.canonical()));
        }
        values.push(value);
    }
    let text = format!("{}({})", random_ident(rng), decl.join(", "));
    let layout = EventLayout::from_declaration(&text).expect("generated declarations parse");
    RandomEvent { layout, values, expected }
}
