use std::fmt;

use super::AbiError;
use crate::model::split_top_level;

/// A Solidity ABI type.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AbiType {
    Address,
    Bool,
    Uint(u16),
    Int(u16),
    FixedBytes(u8),
    Bytes,
    String,
    Array(Box<AbiType>),
    FixedArray(Box<AbiType>, usize),
    Tuple(Vec<AbiType>),
}

impl AbiType {
    /// Parses a type string such as `uint256`, `address[]`, `(address,uint)[2]`.
    /// The aliases `uint` and `int` are accepted and canonicalized.
    pub fn parse(text: &str) -> Result<Self, AbiError> {
        let text = text.trim();
        let bad = || AbiError::BadType(text.to_owned());
        if text.is_empty() {
            return Err(bad());
        }

        // Peel array suffixes from the right.
        if text.ends_with(']') {
            let open = text.rfind('[').ok_or_else(bad)?;
            let inner = AbiType::parse(&text[..open])?;
            let size = text[open + 1..text.len() - 1].trim();
            return if size.is_empty() {
                Ok(AbiType::Array(Box::new(inner)))
            } else {
                let n: usize = size.parse().map_err(|_| bad())?;
                if n == 0 {
                    return Err(bad());
                }
                Ok(AbiType::FixedArray(Box::new(inner), n))
            };
        }

        if let Some(rest) = text.strip_prefix('(') {
            let inner = rest.strip_suffix(')').ok_or_else(bad)?;
            if inner.trim().is_empty() {
                return Ok(AbiType::Tuple(Vec::new()));
            }
            let parts = split_top_level(inner).ok_or_else(bad)?;
            let members = parts.into_iter().map(AbiType::parse).collect::<Result<Vec<_>, _>>()?;
            return Ok(AbiType::Tuple(members));
        }

        let ty = match text {
            "address" => AbiType::Address,
            "bool" => AbiType::Bool,
            "string" => AbiType::String,
            "bytes" => AbiType::Bytes,
            "uint" => AbiType::Uint(256),
            "int" => AbiType::Int(256),
            _ => {
                if let Some(bits) = text.strip_prefix("uint") {
                    AbiType::Uint(parse_bits(bits).ok_or_else(bad)?)
                } else if let Some(bits) = text.strip_prefix("int") {
                    AbiType::Int(parse_bits(bits).ok_or_else(bad)?)
                } else if let Some(n) = text.strip_prefix("bytes") {
                    let n: u8 = n.parse().map_err(|_| bad())?;
                    if !(1..=32).contains(&n) {
                        return Err(bad());
                    }
                    AbiType::FixedBytes(n)
                } else {
                    return Err(bad());
                }
            }
        };
        Ok(ty)
    }

    pub fn canonical(&self) -> String {
        self.to_string()
    }

    pub fn is_dynamic(&self) -> bool {
        match self {
            AbiType::Bytes | AbiType::String | AbiType::Array(_) => true,
            AbiType::FixedArray(inner, _) => inner.is_dynamic(),
            AbiType::Tuple(members) => members.iter().any(AbiType::is_dynamic),
            _ => false,
        }
    }

    /// Bytes occupied in the head of an enclosing tuple.
    pub fn head_size(&self) -> usize {
        if self.is_dynamic() {
            return 32;
        }
        match self {
            AbiType::FixedArray(inner, n) => inner.head_size() * n,
            AbiType::Tuple(members) => members.iter().map(AbiType::head_size).sum(),
            _ => 32,
        }
    }

    pub fn is_elementary(&self) -> bool {
        !matches!(self, AbiType::Array(_) | AbiType::FixedArray(..) | AbiType::Tuple(_))
    }

    /// Container nesting depth: 0 for elementary types.
    pub fn nesting_depth(&self) -> usize {
        match self {
            AbiType::Array(inner) | AbiType::FixedArray(inner, _) => 1 + inner.nesting_depth(),
            AbiType::Tuple(members) => 1 + members.iter().map(AbiType::nesting_depth).max().unwrap_or(0),
            _ => 0,
        }
    }
}

fn parse_bits(bits: &str) -> Option<u16> {
    let n: u16 = bits.parse().ok()?;
    (n.is_multiple_of(8) && (8..=256).contains(&n)).then_some(n)
}

impl fmt::Display for AbiType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbiType::Address => f.write_str("address"),
            AbiType::Bool => f.write_str("bool"),
            AbiType::Uint(n) => write!(f, "uint{n}"),
            AbiType::Int(n) => write!(f, "int{n}"),
            AbiType::FixedBytes(n) => write!(f, "bytes{n}"),
            AbiType::Bytes => f.write_str("bytes"),
            AbiType::String => f.write_str("string"),
            AbiType::Array(inner) => write!(f, "{inner}[]"),
            AbiType::FixedArray(inner, n) => write!(f, "{inner}[{n}]"),
            AbiType::Tuple(members) => {
                f.write_str("(")?;
                for (i, m) in members.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{m}")?;
                }
                f.write_str(")")
            }
        }
    }
}
