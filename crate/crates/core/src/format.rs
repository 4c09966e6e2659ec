//! Versioned, checksummed text framing shared by packages and signatures.
//!
//! ```text
//! <MAGIC> <version>\n
//! sha256 <64 hex digits of the body>\n
//! <body>
//! ```

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hexint;
use crate::paillier::{Ciphertext, PublicKey};

pub(crate) fn frame(magic: &str, version: u32, body: &str) -> String {
    let digest = hex::encode(Sha256::digest(body.as_bytes()));
    format!("{magic} {version}\nsha256 {digest}\n{body}")
}

/// Returns the body after checking magic, version and checksum.
pub(crate) fn unframe<'a>(magic: &str, version: u32, text: &'a str, empty: impl FnOnce() -> Error) -> Result<&'a str> {
    if text.trim().is_empty() {
        return Err(empty());
    }
    let (first, rest) = text
        .split_once('\n')
        .ok_or_else(|| Error::Format("truncated before checksum line".into()))?;
    let found_version = first
        .strip_prefix(magic)
        .and_then(|v| v.strip_prefix(' '))
        .ok_or_else(|| Error::Format(format!("expected {magic} header")))?;
    if found_version != version.to_string() {
        return Err(Error::Format(format!("unsupported version {found_version:?}, expected {version}")));
    }
    let (sum_line, body) = rest
        .split_once('\n')
        .ok_or_else(|| Error::Format("truncated before body".into()))?;
    let digest = sum_line
        .strip_prefix("sha256 ")
        .ok_or_else(|| Error::Format("missing checksum line".into()))?;
    if body.is_empty() {
        return Err(empty());
    }
    if hex::encode(Sha256::digest(body.as_bytes())) != digest {
        return Err(Error::Format("checksum mismatch (corrupt or truncated body)".into()));
    }
    Ok(body)
}

pub(crate) fn cts_to_hex(cts: &[Ciphertext]) -> Vec<String> {
    cts.iter().map(|c| hexint::encode(c.value())).collect()
}

pub(crate) fn cts_from_hex(texts: &[String], pk: &PublicKey) -> Result<Vec<Ciphertext>> {
    texts.iter().map(|t| pk.ciphertext(hexint::decode(t)?)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty() -> Error {
        Error::MalformedPackage("empty".into())
    }

    #[test]
    fn roundtrip_and_rejections() {
        let text = frame("TEST", 1, "{\"a\":1}");
        assert_eq!(unframe("TEST", 1, &text, empty).unwrap(), "{\"a\":1}");
        assert!(matches!(unframe("TEST", 2, &text, empty), Err(Error::Format(_))));
        assert!(matches!(unframe("OTHER", 1, &text, empty), Err(Error::Format(_))));
        assert!(matches!(unframe("TEST", 1, "", empty), Err(Error::MalformedPackage(_))));
        let truncated = &text[..text.len() - 2];
        assert!(matches!(unframe("TEST", 1, truncated, empty), Err(Error::Format(_))));
        let flipped = text.replace("\"a\"", "\"b\"");
        assert!(matches!(unframe("TEST", 1, &flipped, empty), Err(Error::Format(_))));
    }
}
