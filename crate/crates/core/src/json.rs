//! Canonical JSON: object keys sorted, no insignificant whitespace.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    // serde_json's Map is a BTreeMap unless `preserve_order` is enabled, so
    // routing through Value sorts every object.
    let value = serde_json::to_value(value)?;
    Ok(serde_json::to_string(&value)?)
}

/// Hex SHA-256 of the canonical encoding, truncated to `len` characters.
pub fn content_hash<T: Serialize + ?Sized>(value: &T, len: usize) -> Result<String> {
    let text = to_canonical_json(value)?;
    let digest = Sha256::digest(text.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    Ok(hex[..len.min(hex.len())].to_string())
}
