//! Late-interaction MaxSim scoring.
//!
//! `s(q, d) = Σ_i max_j ⟨q_i, c_j⟩` with raw dot products. Each dot product is
//! accumulated in `f64` over ascending coordinates, and the outer sum runs over
//! ascending query position, so every code path here produces bit-identical scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, EmbeddingMatrix};

/// The document token that won the max for one query token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    #[serde(rename = "qid")]
    pub query_id: String,
    #[serde(rename = "qpos")]
    pub query_pos: usize,
    #[serde(rename = "did")]
    pub doc_id: String,
    #[serde(rename = "dpos")]
    pub doc_pos: usize,
    #[serde(rename = "sim")]
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
    /// One record per query row, when captured.
    pub matches: Option<Vec<MatchRecord>>,
}

fn check_pair(query: &EmbeddingMatrix, doc: &EmbeddingMatrix) -> Result<()> {
    if query.dim() != doc.dim() {
        return Err(Error::Contract(format!(
            "query dim {} differs from doc dim {}",
            query.dim(),
            doc.dim()
        )));
    }
    if query.is_empty() {
        return Err(Error::Contract("query has no rows".into()));
    }
    if doc.is_empty() {
        return Err(Error::Contract(
            "MaxSim is undefined for an empty document".into(),
        ));
    }
    Ok(())
}

/// Best `(position, similarity)` for one query row; ties go to the lowest position.
#[inline]
fn best_match(q: &[f32], doc: &EmbeddingMatrix) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (j, c) in doc.iter_rows().enumerate() {
        let s = dot(q, c);
        if s > best.1 {
            best = (j, s);
        }
    }
    best
}

pub fn maxsim_score(query: &EmbeddingMatrix, doc: &EmbeddingMatrix) -> Result<f64> {
    check_pair(query, doc)?;
    Ok(query
        .iter_rows()
        .map(|q| best_match(q, doc).1)
        .fold(0.0, |acc, s| acc + s))
}

pub fn maxsim_with_matches(
    query_id: &str,
    query: &EmbeddingMatrix,
    doc_id: &str,
    doc: &EmbeddingMatrix,
) -> Result<ScoredDoc> {
    check_pair(query, doc)?;
    let mut score = 0.0;
    let mut matches = Vec::with_capacity(query.rows());
    for (i, q) in query.iter_rows().enumerate() {
        let (j, s) = best_match(q, doc);
        score += s;
        matches.push(MatchRecord {
            query_id: query_id.to_string(),
            query_pos: i,
            doc_id: doc_id.to_string(),
            doc_pos: j,
            similarity: s,
        });
    }
    Ok(ScoredDoc {
        doc_id: doc_id.to_string(),
        score,
        matches: Some(matches),
    })
}

/// Doc rows visited per tile in [`score_block`].
const TILE: usize = 4;

/// Score one query against many documents.
///
/// Walks each document in tiles of [`TILE`] rows, updating the running max of
/// every query row per tile. Equal to calling [`maxsim_score`] per document.
pub fn score_block(query: &EmbeddingMatrix, docs: &[&EmbeddingMatrix]) -> Result<Vec<f64>> {
    for doc in docs {
        check_pair(query, doc)?;
    }
    let nq = query.rows();
    let mut best = vec![(usize::MAX, f64::NEG_INFINITY); nq];
    let mut out = Vec::with_capacity(docs.len());
    for doc in docs {
        best.fill((usize::MAX, f64::NEG_INFINITY));
        let rows = doc.rows();
        let mut start = 0;
        while start < rows {
            let end = (start + TILE).min(rows);
            for (i, q) in query.iter_rows().enumerate() {
                let slot = &mut best[i];
                for j in start..end {
                    let s = dot(q, doc.row(j));
                    if s > slot.1 || (s == slot.1 && j < slot.0) {
                        *slot = (j, s);
                    }
                }
            }
            start = end;
        }
        out.push(best.iter().fold(0.0, |acc, &(_, s)| acc + s));
    }
    Ok(out)
}
