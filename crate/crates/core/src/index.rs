//! Flat late-interaction index with exhaustive MaxSim search.
//!
//! A flat index is just its corpus: persistence is an MVEC file plus an optional
//! `<name>.meta.json` describing how the corpus was compressed.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::format::mvec;
use crate::matrix::EmbeddingMatrix;
use crate::meta::{meta_path_for, CompressionMeta};
use crate::scoring::{maxsim_with_matches, score_block, MatchRecord};
use crate::trec::{Qrels, RankedDoc, RunList};

/// Documents scored together by one worker.
const BLOCK_DOCS: usize = 16;

#[derive(Debug, Clone)]
pub struct FlatIndex {
    corpus: Corpus,
    meta: Option<CompressionMeta>,
    lookup: HashMap<String, usize>,
}

/// Which documents get [`MatchRecord`]s during a search.
#[derive(Debug, Clone, Copy, Default)]
pub enum Capture<'a> {
    #[default]
    None,
    /// The returned top-k documents.
    Returned,
    /// The returned documents plus every relevant document in the qrels.
    ReturnedAndRelevant(&'a Qrels),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutput {
    pub results: Vec<RankedDoc>,
    pub matches: Vec<MatchRecord>,
}

pub fn build_index(corpus: Corpus, meta: Option<CompressionMeta>) -> Result<FlatIndex> {
    if let Some(doc) = corpus.docs().iter().find(|d| d.embeddings.is_empty()) {
        return Err(Error::Build(format!("doc {:?} has no vectors", doc.doc_id)));
    }
    if let Some(meta) = &meta {
        let m = meta.budget.m;
        if let Some(doc) = corpus.docs().iter().find(|d| d.embeddings.rows() != m) {
            return Err(Error::Build(format!(
                "doc {:?} has {} vectors but the index budget is {m}",
                doc.doc_id,
                doc.embeddings.rows()
            )));
        }
    }
    let lookup = corpus
        .docs()
        .iter()
        .enumerate()
        .map(|(i, d)| (d.doc_id.clone(), i))
        .collect();
    Ok(FlatIndex {
        corpus,
        meta,
        lookup,
    })
}

impl FlatIndex {
    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn meta(&self) -> Option<&CompressionMeta> {
        self.meta.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.corpus.dim()
    }

    pub fn len(&self) -> usize {
        self.corpus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corpus.is_empty()
    }

    pub fn total_vectors(&self) -> usize {
        self.corpus.total_tokens()
    }

    pub fn doc(&self, doc_id: &str) -> Option<&EmbeddingMatrix> {
        self.lookup
            .get(doc_id)
            .map(|&i| &self.corpus.docs()[i].embeddings)
    }

    /// MaxSim score of every document, in corpus order.
    pub fn score_all(&self, query: &EmbeddingMatrix) -> Result<Vec<f64>> {
        if query.dim() != self.dim() {
            return Err(Error::Query(format!(
                "query dim {} differs from index dim {}",
                query.dim(),
                self.dim()
            )));
        }
        if query.is_empty() {
            return Err(Error::Query("query has no vectors".into()));
        }
        let blocks: Vec<Vec<f64>> = self
            .corpus
            .docs()
            .par_chunks(BLOCK_DOCS)
            .map(|chunk| {
                let docs: Vec<&EmbeddingMatrix> = chunk.iter().map(|d| &d.embeddings).collect();
                score_block(query, &docs)
            })
            .collect::<Result<_>>()?;
        Ok(blocks.into_iter().flatten().collect())
    }

    /// Top-`k` documents by MaxSim, ties by ascending doc id.
    pub fn search(
        &self,
        query_id: &str,
        query: &EmbeddingMatrix,
        k: usize,
        capture: Capture<'_>,
    ) -> Result<SearchOutput> {
        if k == 0 {
            return Err(Error::Query("k must be at least 1".into()));
        }
        let scores = self.score_all(query)?;
        let scored = self
            .corpus
            .docs()
            .iter()
            .map(|d| d.doc_id.clone())
            .zip(scores)
            .collect();
        let results = RunList::rank(scored, k);

        let mut targets: Vec<&str> = Vec::new();
        match capture {
            Capture::None => {}
            Capture::Returned => targets.extend(results.iter().map(|r| r.doc_id.as_str())),
            Capture::ReturnedAndRelevant(qrels) => {
                targets.extend(results.iter().map(|r| r.doc_id.as_str()));
                let seen: HashSet<&str> = targets.iter().copied().collect();
                targets.extend(
                    self.corpus
                        .docs()
                        .iter()
                        .map(|d| d.doc_id.as_str())
                        .filter(|id| !seen.contains(id) && qrels.is_relevant(query_id, id)),
                );
            }
        }
        let mut matches = Vec::new();
        for doc_id in targets {
            let scored = maxsim_with_matches(
                query_id,
                query,
                doc_id,
                &self.corpus.docs()[self.lookup[doc_id]].embeddings,
            )?;
            matches.extend(scored.matches.unwrap_or_default());
        }
        Ok(SearchOutput { results, matches })
    }

    /// Search every query of `queries` in order, collecting one run and all match records.
    pub fn search_many(
        &self,
        queries: &Corpus,
        k: usize,
        capture: Capture<'_>,
        tag: &str,
    ) -> Result<(RunList, Vec<MatchRecord>)> {
        let mut run = RunList::new(tag);
        let mut matches = Vec::new();
        for q in queries.docs() {
            let out = self.search(&q.doc_id, &q.embeddings, k, capture)?;
            run.insert(q.doc_id.clone(), out.results);
            matches.extend(out.matches);
        }
        Ok((run, matches))
    }

    /// Write the corpus as MVEC and, when present, the meta sidecar next to it.
    pub fn save(&self, path: &Path) -> Result<()> {
        mvec::write_mvec(&self.corpus, path)?;
        if let Some(meta) = &self.meta {
            meta.write(&meta_path_for(path))?;
        }
        Ok(())
    }

    /// Load an index saved by [`FlatIndex::save`] (meta sidecar optional).
    pub fn load(path: &Path) -> Result<Self> {
        let corpus = mvec::read_mvec(path)?;
        let meta_path = meta_path_for(path);
        let meta = if meta_path.exists() {
            Some(CompressionMeta::read(&meta_path)?)
        } else {
            None
        };
        build_index(corpus, meta)
    }
}
