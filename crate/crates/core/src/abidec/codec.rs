//! Standard contract-ABI encoding and decoding of parameter tuples.

use std::fmt;

use serde::{Serialize, Serializer};

use super::{AbiError, AbiType};
use crate::model::{Address, TopicHash};

/// A raw 32-byte big-endian word holding a `uintN` or two's-complement `intN`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Word(pub [u8; 32]);

impl Word {
    pub fn from_u128(n: u128) -> Self {
        let mut w = [0u8; 32];
        w[16..].copy_from_slice(&n.to_be_bytes());
        Word(w)
    }

    pub fn from_i128(n: i128) -> Self {
        let fill = if n < 0 { 0xff } else { 0 };
        let mut w = [fill; 32];
        w[16..].copy_from_slice(&n.to_be_bytes());
        Word(w)
    }

    pub fn to_u128(&self) -> Option<u128> {
        if self.0[..16].iter().any(|&b| b != 0) {
            return None;
        }
        let mut low = [0u8; 16];
        low.copy_from_slice(&self.0[16..]);
        Some(u128::from_be_bytes(low))
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.to_u128().and_then(|n| u64::try_from(n).ok())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&b| b == 0)
    }

    fn is_negative(&self) -> bool {
        self.0[0] & 0x80 != 0
    }

    fn negate(&self) -> Word {
        let mut out = [0u8; 32];
        let mut carry = 1u16;
        for i in (0..32).rev() {
            let v = (!self.0[i]) as u16 + carry;
            out[i] = v as u8;
            carry = v >> 8;
        }
        Word(out)
    }

    /// Unsigned decimal rendering of all 256 bits.
    pub fn to_decimal(&self) -> String {
        let mut digits = Vec::new();
        let mut n = self.0;
        while n.iter().any(|&b| b != 0) {
            let mut rem = 0u32;
            for byte in n.iter_mut() {
                let cur = (rem << 8) | *byte as u32;
                *byte = (cur / 10) as u8;
                rem = cur % 10;
            }
            digits.push(b'0' + rem as u8);
        }
        if digits.is_empty() {
            return "0".to_owned();
        }
        digits.reverse();
        String::from_utf8(digits).expect("ascii digits")
    }

    pub fn to_signed_decimal(&self) -> String {
        if self.is_negative() {
            format!("-{}", self.negate().to_decimal())
        } else {
            self.to_decimal()
        }
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

/// A decoded ABI value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AbiValue {
    Address(Address),
    Bool(bool),
    Uint(Word),
    Int(Word),
    FixedBytes(Vec<u8>),
    Bytes(Vec<u8>),
    String(String),
    Array(Vec<AbiValue>),
    Tuple(Vec<AbiValue>),
    /// An indexed dynamic value: only its keccak hash is recoverable.
    Hashed(TopicHash),
}

impl AbiValue {
    pub fn as_address(&self) -> Option<Address> {
        match self {
            AbiValue::Address(a) => Some(*a),
            _ => None,
        }
    }

    pub fn as_u128(&self) -> Option<u128> {
        match self {
            AbiValue::Uint(w) => w.to_u128(),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            AbiValue::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

impl Serialize for AbiValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            AbiValue::Address(a) => a.serialize(s),
            AbiValue::Bool(b) => s.serialize_bool(*b),
            AbiValue::Uint(w) => s.serialize_str(&w.to_decimal()),
            AbiValue::Int(w) => s.serialize_str(&w.to_signed_decimal()),
            AbiValue::FixedBytes(b) | AbiValue::Bytes(b) => s.collect_str(&format_args!("0x{}", hex::encode(b))),
            AbiValue::String(text) => s.serialize_str(text),
            AbiValue::Array(items) | AbiValue::Tuple(items) => items.serialize(s),
            AbiValue::Hashed(h) => s.collect_str(&format_args!("hash:{h}")),
        }
    }
}

fn mismatch(ty: &AbiType, value: &AbiValue) -> AbiError {
    AbiError::ValueMismatch(format!("{value:?} is not a {ty}"))
}

/// Encodes a single static elementary value into a word.
pub(crate) fn encode_word(ty: &AbiType, value: &AbiValue) -> Result<[u8; 32], AbiError> {
    let word = match (ty, value) {
        (AbiType::Address, AbiValue::Address(a)) => a.to_word(),
        (AbiType::Bool, AbiValue::Bool(b)) => Word::from_u128(*b as u128).0,
        (AbiType::Uint(bits), AbiValue::Uint(w)) => {
            check_uint(*bits, w).map_err(|_| mismatch(ty, value))?;
            w.0
        }
        (AbiType::Int(bits), AbiValue::Int(w)) => {
            check_int(*bits, w).map_err(|_| mismatch(ty, value))?;
            w.0
        }
        (AbiType::FixedBytes(n), AbiValue::FixedBytes(b)) if b.len() == *n as usize => {
            let mut w = [0u8; 32];
            w[..b.len()].copy_from_slice(b);
            w
        }
        _ => return Err(mismatch(ty, value)),
    };
    Ok(word)
}

fn check_uint(bits: u16, w: &Word) -> Result<(), AbiError> {
    let free = (256 - bits as usize) / 8;
    if w.0[..free].iter().any(|&b| b != 0) {
        return Err(AbiError::TypeDecode(format!("value exceeds uint{bits}")));
    }
    Ok(())
}

fn check_int(bits: u16, w: &Word) -> Result<(), AbiError> {
    let free = (256 - bits as usize) / 8;
    let sign = if w.0[free] & 0x80 != 0 { 0xff } else { 0 };
    if w.0[..free].iter().any(|&b| b != sign) {
        return Err(AbiError::TypeDecode(format!("value is not a sign-extended int{bits}")));
    }
    Ok(())
}

fn pad32(len: usize) -> usize {
    len.div_ceil(32) * 32
}

/// ABI-encodes `values` as the tuple `types`.
pub fn encode(types: &[AbiType], values: &[AbiValue]) -> Result<Vec<u8>, AbiError> {
    if types.len() != values.len() {
        return Err(AbiError::ValueMismatch(format!("expected {} values, got {}", types.len(), values.len())));
    }
    let head_len: usize = types.iter().map(AbiType::head_size).sum();
    let mut head = Vec::with_capacity(head_len);
    let mut tail = Vec::new();
    for (ty, value) in types.iter().zip(values) {
        if ty.is_dynamic() {
            head.extend_from_slice(&Word::from_u128((head_len + tail.len()) as u128).0);
            tail.extend(encode_one(ty, value)?);
        } else {
            head.extend(encode_one(ty, value)?);
        }
    }
    head.extend(tail);
    Ok(head)
}

fn encode_one(ty: &AbiType, value: &AbiValue) -> Result<Vec<u8>, AbiError> {
    match (ty, value) {
        (AbiType::Bytes, AbiValue::Bytes(b)) => Ok(encode_packed_dynamic(b)),
        (AbiType::String, AbiValue::String(s)) => Ok(encode_packed_dynamic(s.as_bytes())),
        (AbiType::Array(inner), AbiValue::Array(items)) => {
            let mut out = Word::from_u128(items.len() as u128).0.to_vec();
            let types = vec![(**inner).clone(); items.len()];
            out.extend(encode(&types, items)?);
            Ok(out)
        }
        (AbiType::FixedArray(inner, n), AbiValue::Array(items)) if items.len() == *n => {
            let types = vec![(**inner).clone(); *n];
            encode(&types, items)
        }
        (AbiType::Tuple(members), AbiValue::Tuple(items)) => encode(members, items),
        _ if ty.is_elementary() => Ok(encode_word(ty, value)?.to_vec()),
        _ => Err(mismatch(ty, value)),
    }
}

fn encode_packed_dynamic(bytes: &[u8]) -> Vec<u8> {
    let mut out = Word::from_u128(bytes.len() as u128).0.to_vec();
    out.extend_from_slice(bytes);
    out.resize(32 + pad32(bytes.len()), 0);
    out
}

/// Decodes `data` as the tuple `types`.
pub fn decode(types: &[AbiType], data: &[u8]) -> Result<Vec<AbiValue>, AbiError> {
    decode_tuple(types, data, 0)
}

fn read_word(data: &[u8], at: usize) -> Result<[u8; 32], AbiError> {
    let end = at.checked_add(32).ok_or(AbiError::DataTooShort { needed: usize::MAX, actual: data.len() })?;
    let slice = data.get(at..end).ok_or(AbiError::DataTooShort { needed: end, actual: data.len() })?;
    let mut w = [0u8; 32];
    w.copy_from_slice(slice);
    Ok(w)
}

fn read_usize(data: &[u8], at: usize) -> Result<usize, AbiError> {
    let w = Word(read_word(data, at)?);
    w.to_u64()
        .and_then(|n| usize::try_from(n).ok())
        .filter(|&n| n <= data.len())
        .ok_or_else(|| AbiError::TypeDecode(format!("offset or length out of range at byte {at}")))
}

fn decode_tuple(types: &[AbiType], data: &[u8], base: usize) -> Result<Vec<AbiValue>, AbiError> {
    let mut values = Vec::with_capacity(types.len());
    let mut cursor = base;
    for ty in types {
        if ty.is_dynamic() {
            let offset = read_usize(data, cursor)?;
            values.push(decode_at(ty, data, base + offset)?);
        } else {
            values.push(decode_at(ty, data, cursor)?);
        }
        cursor += ty.head_size();
    }
    Ok(values)
}

fn decode_at(ty: &AbiType, data: &[u8], at: usize) -> Result<AbiValue, AbiError> {
    match ty {
        AbiType::Bytes | AbiType::String => {
            let len = read_usize(data, at)?;
            let start = at + 32;
            let bytes = data
                .get(start..start + len)
                .ok_or(AbiError::DataTooShort { needed: start + len, actual: data.len() })?;
            Ok(if *ty == AbiType::Bytes {
                AbiValue::Bytes(bytes.to_vec())
            } else {
                AbiValue::String(String::from_utf8_lossy(bytes).into_owned())
            })
        }
        AbiType::Array(inner) => {
            let len = read_usize(data, at)?;
            let types = vec![(**inner).clone(); len];
            Ok(AbiValue::Array(decode_tuple(&types, data, at + 32)?))
        }
        AbiType::FixedArray(inner, n) => {
            let types = vec![(**inner).clone(); *n];
            Ok(AbiValue::Array(decode_tuple(&types, data, at)?))
        }
        AbiType::Tuple(members) => Ok(AbiValue::Tuple(decode_tuple(members, data, at)?)),
        _ => decode_word(ty, &read_word(data, at)?),
    }
}

/// Decodes a static elementary value from one word, validating padding.
pub(crate) fn decode_word(ty: &AbiType, word: &[u8; 32]) -> Result<AbiValue, AbiError> {
    let w = Word(*word);
    match ty {
        AbiType::Address => {
            if word[..12].iter().any(|&b| b != 0) {
                return Err(AbiError::TypeDecode("dirty address padding".into()));
            }
            let mut a = [0u8; 20];
            a.copy_from_slice(&word[12..]);
            Ok(AbiValue::Address(Address::new(a)))
        }
        AbiType::Bool => match w.to_u128() {
            Some(0) => Ok(AbiValue::Bool(false)),
            Some(1) => Ok(AbiValue::Bool(true)),
            _ => Err(AbiError::TypeDecode("bool word is neither 0 nor 1".into())),
        },
        AbiType::Uint(bits) => {
            check_uint(*bits, &w)?;
            Ok(AbiValue::Uint(w))
        }
        AbiType::Int(bits) => {
            check_int(*bits, &w)?;
            Ok(AbiValue::Int(w))
        }
        AbiType::FixedBytes(n) => {
            let n = *n as usize;
            if word[n..].iter().any(|&b| b != 0) {
                return Err(AbiError::TypeDecode(format!("dirty bytes{n} padding")));
            }
            Ok(AbiValue::FixedBytes(word[..n].to_vec()))
        }
        _ => Err(AbiError::TypeDecode(format!("{ty} is not a word type"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> AbiType {
        AbiType::parse(s).unwrap()
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(Word::from_u128(0).to_decimal(), "0");
        assert_eq!(Word::from_u128(492678).to_decimal(), "492678");
        assert_eq!(
            Word([0xff; 32]).to_decimal(),
            "115792089237316195423570985008687907853269984665640564039457584007913129639935"
        );
        assert_eq!(Word::from_i128(-5).to_signed_decimal(), "-5");
    }

    #[test]
    fn known_encoding_of_uint_and_string() {
        // uint256 7, string "hi": head(2 words) + len + padded data
        let data =
            encode(&[t("uint256"), t("string")], &[AbiValue::Uint(Word::from_u128(7)), AbiValue::String("hi".into())])
                .unwrap();
        assert_eq!(data.len(), 128);
        assert_eq!(data[31], 7);
        assert_eq!(data[63], 64);
        assert_eq!(data[95], 2);
        assert_eq!(&data[96..98], b"hi");
        assert_eq!(
            decode(&[t("uint256"), t("string")], &data).unwrap(),
            vec![AbiValue::Uint(Word::from_u128(7)), AbiValue::String("hi".into())]
        );
    }

    #[test]
    fn zero_data_decodes_to_zero() {
        let v = decode(&[t("uint256")], &[0u8; 32]).unwrap();
        assert_eq!(v, vec![AbiValue::Uint(Word::default())]);
    }

    #[test]
    fn short_data_is_rejected() {
        assert!(matches!(decode(&[t("uint256"), t("uint256")], &[0u8; 40]), Err(AbiError::DataTooShort { .. })));
    }

    #[test]
    fn dirty_padding_is_rejected() {
        let mut word = [0u8; 32];
        word[0] = 1;
        assert!(decode(&[t("address")], &word).is_err());
        assert!(decode(&[t("uint8")], &word).is_err());
        word = [0u8; 32];
        word[31] = 2;
        assert!(decode(&[t("bool")], &word).is_err());
    }

    #[test]
    fn arrays_and_tuples_round_trip() {
        let types = [t("address[]"), t("(uint8,bool)"), t("bytes32[2]")];
        let values = vec![
            AbiValue::Array(vec![
                AbiValue::Address(Address::from_low_u64(1)),
                AbiValue::Address(Address::from_low_u64(2)),
            ]),
            AbiValue::Tuple(vec![AbiValue::Uint(Word::from_u128(3)), AbiValue::Bool(true)]),
            AbiValue::Array(vec![AbiValue::FixedBytes(vec![1; 32]), AbiValue::FixedBytes(vec![2; 32])]),
        ];
        let data = encode(&types, &values).unwrap();
        assert_eq!(decode(&types, &data).unwrap(), values);
    }
}
