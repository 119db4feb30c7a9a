//! JSON header line followed by an f64 little-endian payload.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn write_framed<H: Serialize>(path: impl AsRef<Path>, header: &H, payload: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let mut out = serde_json::to_vec(header)?;
    out.push(b'\n');
    out.reserve(payload.len() * 8);
    for (i, v) in payload.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { index: i });
        }
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a framed file; `expected_len` checks the payload size against the header.
pub fn read_framed<H, F>(path: impl AsRef<Path>, expected_len: F) -> Result<(H, Vec<f64>)>
where
    H: DeserializeOwned,
    F: FnOnce(&H) -> usize,
{
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::MalformedHeader("missing header terminator".into()))?;
    let header: H = serde_json::from_slice(&bytes[..nl])
        .map_err(|e| Error::MalformedHeader(e.to_string()))?;
    let payload = &bytes[nl + 1..];
    let expected = expected_len(&header) * 8;
    if payload.len() != expected {
        return Err(Error::PayloadLength {
            expected,
            found: payload.len(),
        });
    }
    let mut values = Vec::with_capacity(payload.len() / 8);
    for (i, c) in payload.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(c.try_into().expect("chunk of 8"));
        if !v.is_finite() {
            return Err(Error::NonFinite { index: i });
        }
        values.push(v);
    }
    Ok((header, values))
}
