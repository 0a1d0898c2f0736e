//! Last-layer attention from universal query tokens to document tokens.

use std::collections::HashMap;

use crate::corpus::{validate_doc_id, Corpus};
use crate::error::{Error, Result};

/// Attention weights for one document, laid out `[query token][head][doc position]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionSidecar {
    doc_id: String,
    psi: usize,
    heads: usize,
    n: usize,
    weights: Vec<f32>,
}

impl AttentionSidecar {
    pub fn new(
        doc_id: impl Into<String>,
        psi: usize,
        heads: usize,
        n: usize,
        weights: Vec<f32>,
    ) -> Result<Self> {
        let doc_id = doc_id.into();
        validate_doc_id(&doc_id)?;
        if psi == 0 || heads == 0 {
            return Err(Error::Validation(format!(
                "attention for {doc_id:?}: psi and heads must be at least 1 (got {psi}, {heads})"
            )));
        }
        if weights.len() != psi * heads * n {
            return Err(Error::Validation(format!(
                "attention for {doc_id:?}: expected {} weights, got {}",
                psi * heads * n,
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::Validation(format!(
                "attention for {doc_id:?} contains invalid weight {w}"
            )));
        }
        Ok(Self {
            doc_id,
            psi,
            heads,
            n,
            weights,
        })
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn psi(&self) -> usize {
        self.psi
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    /// The length-`n` attention row of query token `q`, head `h`.
    pub fn row(&self, q: usize, h: usize) -> &[f32] {
        let start = (q * self.heads + h) * self.n;
        &self.weights[start..start + self.n]
    }

    /// Copy extended with zero attention up to `n` positions.
    pub fn zero_padded(&self, n: usize) -> Self {
        if n <= self.n {
            return self.clone();
        }
        let mut weights = Vec::with_capacity(self.psi * self.heads * n);
        for q in 0..self.psi {
            for h in 0..self.heads {
                weights.extend_from_slice(self.row(q, h));
                weights.resize(weights.len() + (n - self.n), 0.0);
            }
        }
        Self {
            doc_id: self.doc_id.clone(),
            psi: self.psi,
            heads: self.heads,
            n,
            weights,
        }
    }
}

/// Check that `sidecars` cover exactly the documents of `corpus`, with matching token counts.
pub fn check_attention(sidecars: &[AttentionSidecar], corpus: &Corpus) -> Result<()> {
    let mut by_id: HashMap<&str, &AttentionSidecar> = HashMap::with_capacity(sidecars.len());
    for s in sidecars {
        if by_id.insert(s.doc_id(), s).is_some() {
            return Err(Error::Consistency(format!(
                "duplicate attention for {:?}",
                s.doc_id()
            )));
        }
    }
    for doc in corpus.docs() {
        let s = by_id.remove(doc.doc_id.as_str()).ok_or_else(|| {
            Error::Consistency(format!("no attention sidecar for doc {:?}", doc.doc_id))
        })?;
        if s.n() != doc.embeddings.rows() {
            return Err(Error::Consistency(format!(
                "attention for {:?} covers {} positions but the doc has {} rows",
                doc.doc_id,
                s.n(),
                doc.embeddings.rows()
            )));
        }
    }
    if let Some(id) = by_id.keys().min() {
        return Err(Error::Consistency(format!(
            "attention sidecar for unknown doc {id:?}"
        )));
    }
    Ok(())
}
