use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::matrix::EmbeddingMatrix;

/// Longest accepted document id, in UTF-8 bytes.
pub const MAX_DOC_ID_BYTES: usize = 4096;

/// One document (or query) and its token vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentRecord {
    pub doc_id: String,
    pub embeddings: EmbeddingMatrix,
}

impl DocumentRecord {
    pub fn new(doc_id: impl Into<String>, embeddings: EmbeddingMatrix) -> Result<Self> {
        let doc_id = doc_id.into();
        validate_doc_id(&doc_id)?;
        Ok(Self { doc_id, embeddings })
    }
}

pub(crate) fn validate_doc_id(id: &str) -> Result<()> {
    if id.is_empty() {
        return Err(Error::Validation("doc_id must be non-empty".into()));
    }
    if id.len() > MAX_DOC_ID_BYTES {
        return Err(Error::Validation(format!(
            "doc_id is {} bytes, limit is {MAX_DOC_ID_BYTES}",
            id.len()
        )));
    }
    Ok(())
}

/// An ordered collection of documents sharing one embedding dimension.
///
/// Documents with zero rows are allowed here; compressors and index build reject them.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    dim: usize,
    docs: Vec<DocumentRecord>,
}

impl Corpus {
    pub fn new(dim: usize, docs: Vec<DocumentRecord>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("corpus dim must be at least 1".into()));
        }
        let mut seen = HashSet::with_capacity(docs.len());
        for d in &docs {
            validate_doc_id(&d.doc_id)?;
            if d.embeddings.dim() != dim {
                return Err(Error::Validation(format!(
                    "doc {:?} has dim {}, corpus dim is {dim}",
                    d.doc_id,
                    d.embeddings.dim()
                )));
            }
            if !seen.insert(d.doc_id.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate doc_id {:?}",
                    d.doc_id
                )));
            }
        }
        Ok(Self { dim, docs })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn docs(&self) -> &[DocumentRecord] {
        &self.docs
    }

    pub fn into_docs(self) -> Vec<DocumentRecord> {
        self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, doc_id: &str) -> Option<&DocumentRecord> {
        self.docs.iter().find(|d| d.doc_id == doc_id)
    }

    pub fn total_tokens(&self) -> usize {
        self.docs.iter().map(|d| d.embeddings.rows()).sum()
    }

    /// Mean row count over documents; `None` for an empty corpus.
    pub fn avg_tokens(&self) -> Option<f64> {
        if self.docs.is_empty() {
            None
        } else {
            Some(self.total_tokens() as f64 / self.docs.len() as f64)
        }
    }

    /// Copy with every row L2-normalized (zero rows stay zero).
    pub fn normalized(&self) -> Self {
        Self {
            dim: self.dim,
            docs: self
                .docs
                .iter()
                .map(|d| DocumentRecord {
                    doc_id: d.doc_id.clone(),
                    embeddings: d.embeddings.normalized_rows(),
                })
                .collect(),
        }
    }
}
