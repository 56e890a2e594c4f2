//! Shared domain vocabulary: addresses, topic hashes, event signatures,
//! raw chain records and DAO identities.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;
use tiny_keccak::{Hasher, Keccak};

use crate::abidec::AbiType;

/// Keccak-256 digest of `data`.
pub fn keccak256(data: impl AsRef<[u8]>) -> [u8; 32] {
    let mut out = [0u8; 32];
    let mut hasher = Keccak::v256();
    hasher.update(data.as_ref());
    hasher.finalize(&mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("missing 0x prefix in {0:?}")]
    MissingPrefix(String),
    #[error("malformed hex in {0:?}")]
    MalformedHex(String),
    #[error("wrong length: expected {expected} bytes, got {actual} hex digits")]
    WrongLength { expected: usize, actual: usize },
    #[error("malformed signature {0:?}: {1}")]
    Signature(String, String),
}

fn parse_fixed<const N: usize>(text: &str) -> Result<[u8; N], ParseError> {
    let text = text.trim();
    let digits = text
        .strip_prefix("0x")
        .or_else(|| text.strip_prefix("0X"))
        .ok_or_else(|| ParseError::MissingPrefix(text.to_owned()))?;
    if digits.len() != N * 2 {
        return Err(ParseError::WrongLength { expected: N, actual: digits.len() });
    }
    let mut out = [0u8; N];
    hex::decode_to_slice(digits, &mut out).map_err(|_| ParseError::MalformedHex(text.to_owned()))?;
    Ok(out)
}

/// A 20-byte account address.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Address([u8; 20]);

impl Address {
    pub const ZERO: Address = Address([0u8; 20]);

    pub const fn new(bytes: [u8; 20]) -> Self {
        Address(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0u8; 20]
    }

    /// Left-pads the address into a 32-byte ABI word.
    pub fn to_word(&self) -> [u8; 32] {
        let mut word = [0u8; 32];
        word[12..].copy_from_slice(&self.0);
        word
    }

    /// Convenience for fixtures: an address whose last 8 bytes hold `n`.
    pub fn from_low_u64(n: u64) -> Self {
        let mut bytes = [0u8; 20];
        bytes[12..].copy_from_slice(&n.to_be_bytes());
        Address(bytes)
    }
}

/// Parses a 0x-prefixed, 40-digit hex address in any letter case.
pub fn parse_address(text: &str) -> Result<Address, ParseError> {
    parse_fixed::<20>(text).map(Address)
}

impl FromStr for Address {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_address(s)
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A 32-byte log topic, usually the keccak-256 of an event signature.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TopicHash([u8; 32]);

impl TopicHash {
    pub const fn new(bytes: [u8; 32]) -> Self {
        TopicHash(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn selector(&self) -> [u8; 4] {
        [self.0[0], self.0[1], self.0[2], self.0[3]]
    }
}

impl FromStr for TopicHash {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_fixed::<32>(s).map(TopicHash)
    }
}

impl fmt::Display for TopicHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl fmt::Debug for TopicHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

macro_rules! string_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let text = String::deserialize(deserializer)?;
                text.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(Address);
string_serde!(TopicHash);
string_serde!(CanonicalSignature);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AccountKind {
    ExternallyOwned,
    Contract,
}

impl AccountKind {
    /// Contract iff the code at the queried height is non-empty.
    pub fn from_code_len(len: usize) -> Self {
        if len == 0 {
            AccountKind::ExternallyOwned
        } else {
            AccountKind::Contract
        }
    }

    pub fn is_contract(self) -> bool {
        self == AccountKind::Contract
    }
}

/// An event or function signature in canonical ABI form, e.g.
/// `VoteCast(address,uint256,uint8,uint256,string)`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalSignature {
    name: String,
    params: Vec<String>,
}

impl CanonicalSignature {
    pub fn new<I, S>(name: &str, params: I) -> Result<Self, ParseError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let text =
            format!("{name}({})", params.into_iter().map(|p| p.as_ref().to_owned()).collect::<Vec<_>>().join(","));
        text.parse()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn canonical(&self) -> String {
        format!("{}({})", self.name, self.params.join(","))
    }

    pub fn topic_hash(&self) -> TopicHash {
        signature_topic_hash(self)
    }
}

/// keccak-256 of the canonical text form.
pub fn signature_topic_hash(sig: &CanonicalSignature) -> TopicHash {
    TopicHash(keccak256(sig.canonical()))
}

/// Splits `s` on commas that are not nested inside parentheses.
pub(crate) fn split_top_level(s: &str) -> Option<Vec<&str>> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return None;
                }
            }
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    if depth != 0 {
        return None;
    }
    parts.push(&s[start..]);
    Some(parts)
}

impl FromStr for CanonicalSignature {
    type Err = ParseError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let bad = |why: &str| ParseError::Signature(text.to_owned(), why.to_owned());
        let trimmed = text.trim();
        let open = trimmed.find('(').ok_or_else(|| bad("missing '('"))?;
        if !trimmed.ends_with(')') {
            return Err(bad("missing closing ')'"));
        }
        let name = trimmed[..open].trim();
        if name.is_empty() {
            return Err(bad("empty name"));
        }
        if !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$') {
            return Err(bad("name must be an identifier"));
        }
        let inner = &trimmed[open + 1..trimmed.len() - 1];
        let mut params = Vec::new();
        if !inner.trim().is_empty() {
            let parts = split_top_level(inner).ok_or_else(|| bad("unbalanced parentheses"))?;
            for part in parts {
                let ty = AbiType::parse(part.trim()).map_err(|e| bad(&e.to_string()))?;
                params.push(ty.canonical());
            }
        }
        Ok(CanonicalSignature { name: name.to_owned(), params })
    }
}

impl fmt::Display for CanonicalSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl fmt::Debug for CanonicalSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CanonicalSignature({})", self.canonical())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CallType {
    Call,
    DelegateCall,
    StaticCall,
    Create,
}

/// One internal call observed in a transaction trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub from: Address,
    pub to: Address,
    #[serde(rename = "type")]
    pub call_type: CallType,
    #[serde(rename = "block")]
    pub block_number: u64,
    pub tx_index: u64,
    #[serde(default)]
    pub trace_address: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventLogRecord {
    #[serde(rename = "address")]
    pub emitter: Address,
    pub topics: Vec<TopicHash>,
    #[serde(with = "hex_bytes")]
    pub data: Vec<u8>,
    #[serde(rename = "block")]
    pub block_number: u64,
    pub tx_index: u64,
    pub log_index: u64,
}

impl EventLogRecord {
    pub fn topic0(&self) -> Option<TopicHash> {
        self.topics.first().copied()
    }

    /// Total order used everywhere logs are listed.
    pub fn position(&self) -> (u64, u64, u64) {
        (self.block_number, self.tx_index, self.log_index)
    }
}

pub(crate) mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(&format_args!("0x{}", hex::encode(bytes)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(deserializer)?;
        let digits = text.strip_prefix("0x").unwrap_or(&text);
        hex::decode(digits).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DaoSource {
    SeedList,
    Expansion,
    LabelInference,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DaoIdentityError {
    #[error("dao id must be non-empty")]
    EmptyId,
    #[error("dao {0:?} has no voting-power address, governor address or snapshot space")]
    NoHandle(String),
}

/// A DAO as a vertex of the metagovernance network.
///
/// Seed and expansion identities must carry at least one handle (voting
/// power, governor, or Snapshot space). Identities inferred from labels of
/// voter contracts may carry none.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DaoIdentity {
    pub id: String,
    pub display_name: String,
    pub voting_power_address: Option<Address>,
    pub governor_address: Option<Address>,
    pub snapshot_space: Option<String>,
    pub source: DaoSource,
}

impl DaoIdentity {
    pub fn new(
        id: &str,
        display_name: &str,
        voting_power_address: Option<Address>,
        governor_address: Option<Address>,
        snapshot_space: Option<String>,
        source: DaoSource,
    ) -> Result<Self, DaoIdentityError> {
        let dao = DaoIdentity {
            id: id.to_owned(),
            display_name: display_name.to_owned(),
            voting_power_address,
            governor_address,
            snapshot_space,
            source,
        };
        dao.validate()?;
        Ok(dao)
    }

    /// An identity discovered through labelling, possibly without any handle.
    pub fn inferred(id: &str, display_name: &str) -> Self {
        DaoIdentity {
            id: id.to_owned(),
            display_name: display_name.to_owned(),
            voting_power_address: None,
            governor_address: None,
            snapshot_space: None,
            source: DaoSource::LabelInference,
        }
    }

    pub fn has_handle(&self) -> bool {
        self.voting_power_address.is_some() || self.governor_address.is_some() || self.snapshot_space.is_some()
    }

    pub fn validate(&self) -> Result<(), DaoIdentityError> {
        if self.id.is_empty() {
            return Err(DaoIdentityError::EmptyId);
        }
        if self.source != DaoSource::LabelInference && !self.has_handle() {
            return Err(DaoIdentityError::NoHandle(self.id.clone()));
        }
        Ok(())
    }
}
