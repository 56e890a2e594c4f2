//! Event-log decoding: ABI documents, event layouts, indexed/non-indexed
//! parameter mapping and address scavenging in raw log data.

mod codec;
mod types;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

pub use codec::{decode, encode, AbiValue, Word};
pub use types::AbiType;

use crate::model::{keccak256, Address, CanonicalSignature, EventLogRecord, TopicHash};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AbiError {
    #[error("unsupported or malformed ABI type {0:?}")]
    BadType(String),
    #[error("ABI document parse error: {0}")]
    Parse(String),
    #[error("nesting deeper than one level in {0}")]
    UnsupportedNesting(String),
    #[error("event {0} declares more than three indexed parameters")]
    TooManyIndexed(String),
    #[error("topic mismatch: log topic0 {actual:?} does not match layout {expected}")]
    TopicMismatch { expected: TopicHash, actual: Option<TopicHash> },
    #[error("wrong topic count: expected {expected}, got {actual}")]
    TopicCount { expected: usize, actual: usize },
    #[error("anonymous event {0} cannot be matched by topic")]
    Anonymous(String),
    #[error("data too short: needed {needed} bytes, have {actual}")]
    DataTooShort { needed: usize, actual: usize },
    #[error("type decode failure: {0}")]
    TypeDecode(String),
    #[error("value mismatch: {0}")]
    ValueMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbiItemKind {
    Event,
    Function,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbiParam {
    pub name: String,
    pub ty: AbiType,
    pub indexed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbiItem {
    pub kind: AbiItemKind,
    pub name: String,
    pub inputs: Vec<AbiParam>,
    pub anonymous: bool,
}

impl AbiItem {
    pub fn signature(&self) -> Result<CanonicalSignature, AbiError> {
        CanonicalSignature::new(&self.name, self.inputs.iter().map(|p| p.ty.canonical()))
            .map_err(|e| AbiError::Parse(e.to_string()))
    }
}

/// A parsed contract-ABI JSON array.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AbiDocument {
    pub items: Vec<AbiItem>,
}

#[derive(Deserialize)]
struct RawItem {
    #[serde(rename = "type", default)]
    kind: Option<String>,
    #[serde(default)]
    name: String,
    #[serde(default)]
    inputs: Vec<RawParam>,
    #[serde(default)]
    anonymous: bool,
}

#[derive(Deserialize)]
struct RawParam {
    #[serde(default)]
    name: String,
    #[serde(rename = "type")]
    ty: String,
    #[serde(default)]
    indexed: bool,
    #[serde(default)]
    components: Vec<RawParam>,
}

fn param_type(raw: &RawParam) -> Result<AbiType, AbiError> {
    match raw.ty.strip_prefix("tuple") {
        Some(suffix) => {
            let members = raw.components.iter().map(param_type).collect::<Result<Vec<_>, _>>()?;
            let inner = AbiType::Tuple(members).canonical();
            AbiType::parse(&format!("{inner}{suffix}"))
        }
        None => AbiType::parse(&raw.ty),
    }
}

impl AbiDocument {
    /// Parses an ABI JSON array. A JSON string holding the array (as returned
    /// by block-explorer APIs) is unwrapped first.
    pub fn from_value(value: &Value) -> Result<Self, AbiError> {
        let owned;
        let value = match value {
            Value::String(text) => {
                owned = serde_json::from_str::<Value>(text).map_err(|e| AbiError::Parse(e.to_string()))?;
                &owned
            }
            other => other,
        };
        let raw: Vec<RawItem> = serde_json::from_value(value.clone()).map_err(|e| AbiError::Parse(e.to_string()))?;
        let mut items = Vec::with_capacity(raw.len());
        for item in raw {
            let kind = match item.kind.as_deref() {
                Some("event") => AbiItemKind::Event,
                Some("function") | None => AbiItemKind::Function,
                Some(_) => AbiItemKind::Other,
            };
            let inputs = item
                .inputs
                .iter()
                .map(|p| Ok(AbiParam { name: p.name.clone(), ty: param_type(p)?, indexed: p.indexed }))
                .collect::<Result<Vec<_>, AbiError>>()?;
            items.push(AbiItem { kind, name: item.name, inputs, anonymous: item.anonymous });
        }
        Ok(AbiDocument { items })
    }

    pub fn parse(text: &str) -> Result<Self, AbiError> {
        let value: Value = serde_json::from_str(text).map_err(|e| AbiError::Parse(e.to_string()))?;
        Self::from_value(&value)
    }

    pub fn events(&self) -> impl Iterator<Item = &AbiItem> {
        self.items.iter().filter(|i| i.kind == AbiItemKind::Event)
    }

    pub fn functions(&self) -> impl Iterator<Item = &AbiItem> {
        self.items.iter().filter(|i| i.kind == AbiItemKind::Function)
    }

    pub fn event_signatures(&self) -> Result<Vec<CanonicalSignature>, AbiError> {
        self.events().map(AbiItem::signature).collect()
    }

    pub fn function_signatures(&self) -> Result<Vec<CanonicalSignature>, AbiError> {
        self.functions().map(AbiItem::signature).collect()
    }

    /// Renders events and functions back into standard ABI JSON. Other
    /// items (constructors, errors, fallbacks) are dropped.
    pub fn to_json(&self) -> Value {
        fn param(p: &AbiParam, with_indexed: bool) -> Value {
            let mut v = type_json(&p.ty);
            v["name"] = json!(p.name);
            if with_indexed {
                v["indexed"] = json!(p.indexed);
            }
            v
        }
        fn type_json(ty: &AbiType) -> Value {
            let mut suffix = String::new();
            let mut base = ty;
            loop {
                match base {
                    AbiType::Array(inner) => {
                        suffix.insert_str(0, "[]");
                        base = inner;
                    }
                    AbiType::FixedArray(inner, n) => {
                        suffix.insert_str(0, &format!("[{n}]"));
                        base = inner;
                    }
                    _ => break,
                }
            }
            match base {
                AbiType::Tuple(members) => json!({
                    "type": format!("tuple{suffix}"),
                    "components": members.iter().map(|m| { let mut v = type_json(m); v["name"] = json!(""); v }).collect::<Vec<_>>(),
                }),
                other => json!({ "type": format!("{other}{suffix}") }),
            }
        }
        Value::Array(
            self.items
                .iter()
                .filter(|item| item.kind != AbiItemKind::Other)
                .map(|item| match item.kind {
                    AbiItemKind::Event => json!({
                        "type": "event",
                        "name": item.name,
                        "anonymous": item.anonymous,
                        "inputs": item.inputs.iter().map(|p| param(p, true)).collect::<Vec<_>>(),
                    }),
                    _ => json!({
                        "type": "function",
                        "name": item.name,
                        "inputs": item.inputs.iter().map(|p| param(p, false)).collect::<Vec<_>>(),
                        "outputs": [],
                        "stateMutability": "nonpayable",
                    }),
                })
                .collect(),
        )
    }
}

/// One event parameter in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventParam {
    pub name: String,
    #[serde(rename = "type", serialize_with = "ser_type")]
    pub ty: AbiType,
    pub indexed: bool,
}

fn ser_type<S: serde::Serializer>(ty: &AbiType, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&ty.canonical())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventLayout {
    pub signature: CanonicalSignature,
    pub topic: TopicHash,
    pub params: Vec<EventParam>,
    pub anonymous: bool,
}

impl EventLayout {
    pub fn from_item(item: &AbiItem) -> Result<Self, AbiError> {
        let signature = item.signature()?;
        for p in &item.inputs {
            if p.ty.nesting_depth() > 1 {
                return Err(AbiError::UnsupportedNesting(format!("{} in {signature}", p.ty)));
            }
        }
        let indexed = item.inputs.iter().filter(|p| p.indexed).count();
        let limit = if item.anonymous { 4 } else { 3 };
        if indexed > limit {
            return Err(AbiError::TooManyIndexed(signature.canonical()));
        }
        Ok(EventLayout {
            topic: signature.topic_hash(),
            signature,
            params: item
                .inputs
                .iter()
                .map(|p| EventParam { name: p.name.clone(), ty: p.ty.clone(), indexed: p.indexed })
                .collect(),
            anonymous: item.anonymous,
        })
    }

    /// Parses a human-readable event declaration such as
    /// `VoteCast(address indexed voter, uint256 proposalId, uint8 support)`.
    pub fn from_declaration(decl: &str) -> Result<Self, AbiError> {
        let bad = || AbiError::Parse(format!("bad event declaration {decl:?}"));
        let open = decl.find('(').ok_or_else(bad)?;
        let inner = decl[open + 1..].trim_end().strip_suffix(')').ok_or_else(bad)?;
        let mut inputs = Vec::new();
        if !inner.trim().is_empty() {
            for part in crate::model::split_top_level(inner).ok_or_else(bad)? {
                let words: Vec<&str> = part.split_whitespace().collect();
                let (ty, rest) = words.split_first().ok_or_else(bad)?;
                let indexed = rest.first() == Some(&"indexed");
                let name = rest.iter().find(|w| **w != "indexed").copied().unwrap_or("");
                inputs.push(AbiParam { name: name.to_owned(), ty: AbiType::parse(ty)?, indexed });
            }
        }
        let item = AbiItem { kind: AbiItemKind::Event, name: decl[..open].trim().to_owned(), inputs, anonymous: false };
        Self::from_item(&item)
    }

    pub fn indexed_count(&self) -> usize {
        self.params.iter().filter(|p| p.indexed).count()
    }

    pub fn to_item(&self) -> AbiItem {
        AbiItem {
            kind: AbiItemKind::Event,
            name: self.signature.name().to_owned(),
            inputs: self
                .params
                .iter()
                .map(|p| AbiParam { name: p.name.clone(), ty: p.ty.clone(), indexed: p.indexed })
                .collect(),
            anonymous: self.anonymous,
        }
    }
}

/// One layout per event item of the ABI, parameters kept in order.
pub fn layout_from_abi(abi: &AbiDocument) -> Result<Vec<EventLayout>, AbiError> {
    abi.events().map(EventLayout::from_item).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecodedEvent {
    pub layout: EventLayout,
    pub values: Vec<(String, AbiValue)>,
    pub raw: EventLogRecord,
}

impl DecodedEvent {
    pub fn get(&self, name: &str) -> Option<&AbiValue> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    /// Value of the first parameter accepted by `pick`, which sees the
    /// lowercased name with leading underscores stripped.
    pub fn find<F>(&self, mut pick: F) -> Option<&AbiValue>
    where
        F: FnMut(&str, &AbiType) -> bool,
    {
        self.layout
            .params
            .iter()
            .zip(&self.values)
            .find(|(p, _)| pick(&normalized_name(&p.name), &p.ty))
            .map(|(_, (_, v))| v)
    }

    /// The voter field: an address parameter whose name contains "voter".
    pub fn voter(&self) -> Option<Address> {
        self.find(|name, ty| *ty == AbiType::Address && name.contains("voter")).and_then(AbiValue::as_address)
    }
}

pub(crate) fn normalized_name(name: &str) -> String {
    name.trim_start_matches('_').to_ascii_lowercase()
}

fn indexed_topic(ty: &AbiType, value: &AbiValue) -> Result<TopicHash, AbiError> {
    if let AbiValue::Hashed(h) = value {
        return Ok(*h);
    }
    let bytes = match (ty, value) {
        (AbiType::String, AbiValue::String(s)) => keccak256(s.as_bytes()),
        (AbiType::Bytes, AbiValue::Bytes(b)) => keccak256(b),
        (AbiType::Array(inner) | AbiType::FixedArray(inner, _), AbiValue::Array(items))
            if inner.is_elementary() && !inner.is_dynamic() =>
        {
            let mut packed = Vec::with_capacity(items.len() * 32);
            for item in items {
                packed.extend_from_slice(&codec::encode_word(inner, item)?);
            }
            keccak256(packed)
        }
        _ if ty.is_elementary() && !ty.is_dynamic() => codec::encode_word(ty, value)?,
        _ => return Err(AbiError::ValueMismatch(format!("cannot index {ty}"))),
    };
    Ok(TopicHash::new(bytes))
}

/// Builds the topics and data of a log carrying `values` under `layout`.
/// Indexed dynamic values are hashed; passing `AbiValue::Hashed` uses the
/// hash as-is.
pub fn encode_event(layout: &EventLayout, values: &[AbiValue]) -> Result<(Vec<TopicHash>, Vec<u8>), AbiError> {
    if values.len() != layout.params.len() {
        return Err(AbiError::ValueMismatch(format!(
            "{} expects {} values, got {}",
            layout.signature,
            layout.params.len(),
            values.len()
        )));
    }
    let mut topics = Vec::new();
    if !layout.anonymous {
        topics.push(layout.topic);
    }
    let mut data_types = Vec::new();
    let mut data_values = Vec::new();
    for (param, value) in layout.params.iter().zip(values) {
        if param.indexed {
            topics.push(indexed_topic(&param.ty, value)?);
        } else {
            data_types.push(param.ty.clone());
            data_values.push(value.clone());
        }
    }
    Ok((topics, encode(&data_types, &data_values)?))
}

/// Decodes `log` under `layout`: indexed parameters come from topics 1..,
/// the rest from the data section.
pub fn decode_event(log: &EventLogRecord, layout: &EventLayout) -> Result<DecodedEvent, AbiError> {
    if layout.anonymous {
        return Err(AbiError::Anonymous(layout.signature.canonical()));
    }
    if log.topic0() != Some(layout.topic) {
        return Err(AbiError::TopicMismatch { expected: layout.topic, actual: log.topic0() });
    }
    let expected_topics = 1 + layout.indexed_count();
    if log.topics.len() != expected_topics {
        return Err(AbiError::TopicCount { expected: expected_topics, actual: log.topics.len() });
    }
    let data_types: Vec<AbiType> = layout.params.iter().filter(|p| !p.indexed).map(|p| p.ty.clone()).collect();
    let mut data_values = decode(&data_types, &log.data)?.into_iter();
    let mut topics = log.topics[1..].iter();
    let mut values = Vec::with_capacity(layout.params.len());
    for param in &layout.params {
        let value = if param.indexed {
            let topic = topics.next().expect("topic count checked");
            if param.ty.is_elementary() && !param.ty.is_dynamic() {
                codec::decode_word(&param.ty, topic.as_bytes())?
            } else {
                AbiValue::Hashed(*topic)
            }
        } else {
            data_values.next().expect("decoded one value per data param")
        };
        values.push((param.name.clone(), value));
    }
    Ok(DecodedEvent { layout: layout.clone(), values, raw: log.clone() })
}

/// Scans 32-byte words of `data` for left-padded addresses: the first 12
/// bytes zero and the last 20 not all zero. A trailing partial word is ignored.
pub fn scavenge_addresses(data: &[u8]) -> Vec<Address> {
    data.chunks_exact(32)
        .filter(|w| w[..12].iter().all(|&b| b == 0) && w[12..].iter().any(|&b| b != 0))
        .map(|w| {
            let mut a = [0u8; 20];
            a.copy_from_slice(&w[12..]);
            Address::new(a)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const VOTE_ABI: &str = r#"[
        {"type":"event","name":"VoteEmitted","anonymous":false,"inputs":[
            {"name":"voter","type":"address","indexed":true},
            {"name":"proposalId","type":"uint256","indexed":false},
            {"name":"support","type":"bool","indexed":false}]},
        {"type":"event","name":"Shadow","anonymous":true,"inputs":[
            {"name":"who","type":"address","indexed":true}]},
        {"type":"function","name":"castVote","inputs":[
            {"name":"proposalId","type":"uint256"},{"name":"support","type":"bool"}],"outputs":[]}
    ]"#;

    fn log_with(topics: Vec<TopicHash>, data: Vec<u8>) -> EventLogRecord {
        EventLogRecord { emitter: Address::from_low_u64(9), topics, data, block_number: 1, tx_index: 0, log_index: 0 }
    }

    #[test]
    fn layout_preserves_params() {
        let abi = AbiDocument::parse(VOTE_ABI).unwrap();
        let layouts = layout_from_abi(&abi).unwrap();
        assert_eq!(layouts.len(), 2);
        let vote = &layouts[0];
        assert_eq!(vote.params.len(), 3);
        assert_eq!(vote.indexed_count(), 1);
        assert_eq!(vote.params[0].name, "voter");
        assert_eq!(vote.signature.canonical(), "VoteEmitted(address,uint256,bool)");
        assert!(layouts[1].anonymous);
        assert_eq!(abi.function_signatures().unwrap()[0].canonical(), "castVote(uint256,bool)");
    }

    #[test]
    fn empty_event_list_gives_no_layouts() {
        assert!(layout_from_abi(&AbiDocument::parse("[]").unwrap()).unwrap().is_empty());
    }

    #[test]
    fn string_wrapped_abi_is_unwrapped() {
        let wrapped = Value::String(VOTE_ABI.to_owned());
        assert_eq!(AbiDocument::from_value(&wrapped).unwrap(), AbiDocument::parse(VOTE_ABI).unwrap());
        assert!(matches!(AbiDocument::parse("{not json"), Err(AbiError::Parse(_))));
    }

    #[test]
    fn tuple_components_and_deep_nesting() {
        let abi = AbiDocument::parse(
            r#"[{"type":"event","name":"Flat","inputs":[{"name":"t","type":"tuple","components":[{"name":"a","type":"address"},{"name":"b","type":"uint8"}]}]},
                {"type":"event","name":"Deep","inputs":[{"name":"t","type":"tuple[]","components":[{"name":"a","type":"address"}]}]}]"#,
        )
        .unwrap();
        let items: Vec<_> = abi.events().collect();
        assert_eq!(EventLayout::from_item(items[0]).unwrap().signature.canonical(), "Flat((address,uint8))");
        assert!(matches!(EventLayout::from_item(items[1]), Err(AbiError::UnsupportedNesting(_))));
        // the rendered document parses back to the same items
        assert_eq!(AbiDocument::from_value(&abi.to_json()).unwrap(), abi);
    }

    #[test]
    fn decode_reads_voter_from_topic_one() {
        let layout =
            EventLayout::from_declaration("VoteEmitted(address indexed voter, uint256 proposalId, bool support)")
                .unwrap();
        let voter = Address::from_low_u64(0xabc);
        let (topics, data) = encode_event(
            &layout,
            &[AbiValue::Address(voter), AbiValue::Uint(Word::from_u128(95)), AbiValue::Bool(true)],
        )
        .unwrap();
        assert_eq!(topics[1].as_bytes()[12..], voter.as_bytes()[..]);
        let decoded = decode_event(&log_with(topics, data), &layout).unwrap();
        assert_eq!(decoded.voter(), Some(voter));
        assert_eq!(decoded.get("proposalId").and_then(AbiValue::as_u128), Some(95));
    }

    #[test]
    fn decode_rejects_topic_mismatch() {
        let layout = EventLayout::from_declaration("Foo(uint256 a)").unwrap();
        let other = EventLayout::from_declaration("Bar(uint256 a)").unwrap();
        let err = decode_event(&log_with(vec![other.topic], vec![0; 32]), &layout).unwrap_err();
        assert!(matches!(err, AbiError::TopicMismatch { .. }));
    }

    #[test]
    fn indexed_string_is_hashed() {
        let layout = EventLayout::from_declaration("Tagged(string indexed tag, uint256 n)").unwrap();
        let (topics, data) =
            encode_event(&layout, &[AbiValue::String("gauge".into()), AbiValue::Uint(Word::from_u128(1))]).unwrap();
        let decoded = decode_event(&log_with(topics, data), &layout).unwrap();
        assert_eq!(decoded.values[0].1, AbiValue::Hashed(TopicHash::new(keccak256("gauge"))));
    }

    #[test]
    fn scavenge_rules() {
        assert!(scavenge_addresses(&[]).is_empty());
        let a = Address::from_low_u64(0x1234);
        assert_eq!(scavenge_addresses(&a.to_word()), vec![a]);
        // zero word and partial word are ignored
        let mut data = [0u8; 32].to_vec();
        data.extend_from_slice(&a.to_word());
        data.extend_from_slice(&[1u8; 10]);
        assert_eq!(scavenge_addresses(&data), vec![a]);
    }
}
