//! The FMAP field-map format: the bytes `FMAP`, width and height as
//! little-endian `u32`, then `width * height` little-endian `f32` values in
//! row-major order.
//!
//! Values are stored as `f32`, so writing an `f64` field rounds it once;
//! anything read back from an FMAP survives further round trips exactly.

use std::path::Path;

use cellfield_core::FieldMap;

use crate::error::{AtPath, Error, Result};
use crate::raster_io::write_atomic;

pub const MAGIC: [u8; 4] = *b"FMAP";
const HEADER_LEN: usize = 12;

pub fn encode(field: &FieldMap) -> Vec<u8> {
    let (w, h) = field.dims();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * field.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out.extend_from_slice(&(h as u32).to_le_bytes());
    for &v in field.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Parses FMAP bytes; the error string says what is wrong with them.
pub fn decode(bytes: &[u8]) -> std::result::Result<FieldMap, String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!("{} bytes is shorter than the header", bytes.len()));
    }
    if bytes[..4] != MAGIC {
        return Err(format!(
            "bad magic {:?}",
            String::from_utf8_lossy(&bytes[..4])
        ));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (w, h) = (word(4), word(8));
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN));
    if expected != Some(bytes.len()) {
        return Err(format!(
            "{w}x{h} header does not match {} bytes of data",
            bytes.len() - HEADER_LEN
        ));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    FieldMap::new(w, h, values).map_err(|e| e.to_string())
}

pub fn read(path: &Path) -> Result<FieldMap> {
    let bytes = std::fs::read(path).at(path)?;
    decode(&bytes).map_err(|reason| Error::Fmap {
        path: path.to_owned(),
        reason,
    })
}

pub fn write(path: &Path, field: &FieldMap) -> Result<()> {
    write_atomic(path, &encode(field))
}
