//! Little-endian binary interchange formats.

pub mod matt;
pub mod mvec;

use crate::error::{Error, Result};

/// Cursor over an in-memory file that reports byte offsets on failure.
pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn offset(&self) -> u64 {
        self.pos as u64
    }

    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(Error::Corruption {
                offset: self.pos as u64,
                reason: format!(
                    "truncated while reading {what}: need {len} bytes, {} left",
                    self.bytes.len() - self.pos
                ),
            }),
        }
    }

    pub(crate) fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let got = self
            .take(4, "magic")
            .map_err(|_| Error::Format("file too short to hold a magic number".into()))?;
        if got != expected {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(expected)
            )));
        }
        Ok(())
    }

    pub(crate) fn version(&mut self, supported: u32) -> Result<()> {
        let v = self.u32("version")?;
        if v != supported {
            return Err(Error::Format(format!(
                "unsupported version {v}, expected {supported}"
            )));
        }
        Ok(())
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub(crate) fn id(&mut self) -> Result<String> {
        let at = self.offset();
        let len = self.u32("id length")? as usize;
        if len == 0 || len > crate::corpus::MAX_DOC_ID_BYTES {
            return Err(Error::Validation(format!(
                "id length {len} at byte {at} out of range"
            )));
        }
        let raw = self.take(len, "id bytes")?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| Error::Validation(format!("id at byte {at} is not valid UTF-8")))
    }

    /// Read `count` f32 values; rejects non-finite values with their offset.
    pub(crate) fn f32s(&mut self, count: usize, what: &str) -> Result<Vec<f32>> {
        let start = self.pos;
        let len = count.checked_mul(4).ok_or_else(|| Error::Corruption {
            offset: start as u64,
            reason: format!("{what} count {count} overflows"),
        })?;
        let raw = self.take(len, what)?;
        let mut out = Vec::with_capacity(count);
        for (i, chunk) in raw.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::Validation(format!(
                    "non-finite {what} value at byte {}",
                    start + 4 * i
                )));
            }
            out.push(v);
        }
        Ok(out)
    }

    pub(crate) fn finish(self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Corruption {
                offset: self.pos as u64,
                reason: format!("{} trailing bytes", self.bytes.len() - self.pos),
            });
        }
        Ok(())
    }
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_id(out: &mut Vec<u8>, id: &str) {
    put_u32(out, id.len() as u32);
    out.extend_from_slice(id.as_bytes());
}

pub(crate) fn put_f32s(out: &mut Vec<u8>, values: &[f32]) {
    out.reserve(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Validation(format!("{what} {v} does not fit in u32")))
}
