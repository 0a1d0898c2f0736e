//! MATT attention sidecar files.
//!
//! ```text
//! "MATT" | version u32 = 1 | doc_count u64
//! per doc: id_len u32 | id bytes | psi u32 | heads u32 | n u32 | psi*heads*n f32
//! ```
//! Weights are ordered by query token, then head, then document position.

use std::fs;
use std::path::Path;

use super::{put_f32s, put_id, put_u32, put_u64, to_u32, ByteReader};
use crate::attention::AttentionSidecar;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MATT";
pub const VERSION: u32 = 1;

pub fn encode(sidecars: &[AttentionSidecar]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    put_u64(&mut out, sidecars.len() as u64);
    for s in sidecars {
        put_id(&mut out, s.doc_id());
        put_u32(&mut out, to_u32(s.psi(), "psi")?);
        put_u32(&mut out, to_u32(s.heads(), "heads")?);
        put_u32(&mut out, to_u32(s.n(), "n")?);
        put_f32s(&mut out, s.weights());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Vec<AttentionSidecar>> {
    let mut r = ByteReader::new(bytes);
    r.magic(MAGIC)?;
    r.version(VERSION)?;
    let count = r.u64("doc count")?;
    let mut out = Vec::new();
    for _ in 0..count {
        let id = r.id()?;
        let at = r.offset();
        let psi = r.u32("psi")? as usize;
        let heads = r.u32("heads")? as usize;
        let n = r.u32("n")? as usize;
        let total = psi
            .checked_mul(heads)
            .and_then(|v| v.checked_mul(n))
            .ok_or_else(|| Error::Corruption {
                offset: at,
                reason: "weight count overflows".into(),
            })?;
        let weights = r.f32s(total, "attention")?;
        let sidecar = AttentionSidecar::new(id, psi, heads, n, weights)
            .map_err(|e| Error::Validation(format!("record at byte {at}: {e}")))?;
        out.push(sidecar);
    }
    r.finish()?;
    Ok(out)
}

pub fn read_attention(path: &Path) -> Result<Vec<AttentionSidecar>> {
    decode(&fs::read(path)?)
}

pub fn write_attention(sidecars: &[AttentionSidecar], path: &Path) -> Result<()> {
    fs::write(path, encode(sidecars)?)?;
    Ok(())
}
