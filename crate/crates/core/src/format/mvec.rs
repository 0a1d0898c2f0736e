//! MVEC corpus files.
//!
//! ```text
//! "MVEC" | version u32 = 1 | dim u32 | doc_count u64
//! per doc: id_len u32 | id bytes | token_count u32 | token_count*dim f32 (row-major)
//! ```
//! All integers and floats little-endian.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{put_f32s, put_id, put_u32, put_u64, to_u32, ByteReader};
use crate::corpus::{Corpus, DocumentRecord};
use crate::error::{Error, Result};
use crate::matrix::EmbeddingMatrix;

pub const MAGIC: &[u8; 4] = b"MVEC";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 20;

pub fn encode(corpus: &Corpus) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(HEADER_LEN + corpus.total_tokens() * corpus.dim() * 4);
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    put_u32(&mut out, to_u32(corpus.dim(), "dim")?);
    put_u64(&mut out, corpus.len() as u64);
    for doc in corpus.docs() {
        put_id(&mut out, &doc.doc_id);
        put_u32(&mut out, to_u32(doc.embeddings.rows(), "token count")?);
        put_f32s(&mut out, doc.embeddings.data());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Corpus> {
    let mut r = ByteReader::new(bytes);
    r.magic(MAGIC)?;
    r.version(VERSION)?;
    let dim = r.u32("dim")? as usize;
    if dim == 0 {
        return Err(Error::Validation("dim must be at least 1".into()));
    }
    let count = r.u64("doc count")?;
    let mut docs = Vec::new();
    for _ in 0..count {
        let id = r.id()?;
        let at = r.offset();
        let rows = r.u32("token count")? as usize;
        let data = r.f32s(rows * dim, "embedding")?;
        let embeddings = EmbeddingMatrix::new(rows, dim, data)
            .map_err(|e| Error::Validation(format!("doc {id:?} at byte {at}: {e}")))?;
        docs.push(DocumentRecord::new(id, embeddings)?);
    }
    r.finish()?;
    Corpus::new(dim, docs)
}

pub fn read_mvec(path: &Path) -> Result<Corpus> {
    decode(&fs::read(path)?)
}

pub fn write_mvec(corpus: &Corpus, path: &Path) -> Result<()> {
    fs::write(path, encode(corpus)?)?;
    Ok(())
}

/// Hex SHA-256 of the corpus' MVEC encoding.
pub fn fingerprint(corpus: &Corpus) -> String {
    let bytes = encode(corpus).expect("in-memory corpus always encodes");
    hex::encode(Sha256::digest(&bytes))
}
