//! Big integers as lowercase hexadecimal strings without leading zeros.

use num_bigint::BigUint;
use num_traits::Zero;
use serde::{de, Deserialize, Deserializer, Serializer};

use crate::error::{Error, Result};

pub fn encode(value: &BigUint) -> String {
    if value.is_zero() {
        "0".to_owned()
    } else {
        value.to_str_radix(16)
    }
}

/// Strict inverse of [`encode`]: rejects uppercase digits, signs, empty
/// strings and leading zeros so that every integer has one spelling.
pub fn decode(text: &str) -> Result<BigUint> {
    let bytes = text.as_bytes();
    if bytes.is_empty() {
        return Err(Error::Format("empty integer".into()));
    }
    if bytes.len() > 1 && bytes[0] == b'0' {
        return Err(Error::Format(format!("leading zero in {text:?}")));
    }
    if !bytes.iter().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(b)) {
        return Err(Error::Format(format!("not lowercase hex: {text:?}")));
    }
    BigUint::parse_bytes(bytes, 16).ok_or_else(|| Error::Format(format!("bad integer {text:?}")))
}

pub fn serialize<S: Serializer>(value: &BigUint, serializer: S) -> Result<S::Ok, S::Error> {
    serializer.serialize_str(&encode(value))
}

pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<BigUint, D::Error> {
    let text = String::deserialize(deserializer)?;
    decode(&text).map_err(de::Error::custom)
}

pub mod vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(values: &[BigUint], serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(values.len()))?;
        for v in values {
            seq.serialize_element(&encode(v))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<BigUint>, D::Error> {
        let texts = Vec::<String>::deserialize(deserializer)?;
        texts
            .iter()
            .map(|t| decode(t).map_err(de::Error::custom))
            .collect()
    }
}
