//! Fixed-budget document compressors and the corpus-level driver.

pub mod agc;
pub mod hpool;
pub mod parametric;

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;

use crate::attention::AttentionSidecar;
use crate::corpus::{Corpus, DocumentRecord};
use crate::error::{Error, Result};
use crate::matrix::EmbeddingMatrix;
use crate::meta::{Budget, CompressionMeta, Method};
use crate::seed::derive_seed;

use self::agc::{AgcConfig, Selection};
use self::parametric::{MemTokLayout, ResizeWeights};

/// Assignment of `n` tokens to `k` nonempty clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterPartition {
    assignments: Vec<usize>,
    k: usize,
    sizes: Vec<usize>,
}

impl ClusterPartition {
    pub fn from_assignments(assignments: Vec<usize>, k: usize) -> Result<Self> {
        let mut sizes = vec![0; k];
        for &a in &assignments {
            if a >= k {
                return Err(Error::Contract(format!(
                    "cluster label {a} out of range for k={k}"
                )));
            }
            sizes[a] += 1;
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::Contract(format!("cluster {empty} is empty")));
        }
        Ok(Self {
            assignments,
            k,
            sizes,
        })
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Number of tokens covered.
    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Ascending member lists, indexed by label.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self.sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (i, &a) in self.assignments.iter().enumerate() {
            out[a].push(i);
        }
        out
    }

    /// True when labels are numbered by each cluster's smallest member.
    pub fn is_canonical(&self) -> bool {
        let mut next = 0;
        for &a in &self.assignments {
            if a > next {
                return false;
            }
            if a == next {
                next += 1;
            }
        }
        true
    }
}

/// A compressor applied to every document of a corpus.
#[derive(Debug, Clone, Copy)]
pub enum Compressor<'a> {
    SeqResize(&'a ResizeWeights),
    MemTok(MemTokLayout),
    /// The first `budget.protected` token positions are protected.
    HPool(Budget),
    Agc {
        config: AgcConfig,
        attention: &'a [AttentionSidecar],
    },
}

impl Compressor<'_> {
    pub fn method(&self) -> Method {
        match self {
            Compressor::SeqResize(_) => Method::SeqResize,
            Compressor::MemTok(_) => Method::MemTok,
            Compressor::HPool(_) => Method::HPool,
            Compressor::Agc { .. } => Method::Agc,
        }
    }

    pub fn budget(&self) -> Result<Budget> {
        match self {
            Compressor::SeqResize(w) => Budget::plain(w.m()),
            Compressor::MemTok(layout) => Budget::plain(layout.m),
            Compressor::HPool(b) => Ok(*b),
            Compressor::Agc { config, .. } => Budget::plain(config.m),
        }
    }

    /// Fewest rows a document needs before compression (seq-resize pads internally).
    fn min_rows(&self) -> usize {
        match self {
            Compressor::SeqResize(_) => 1,
            Compressor::MemTok(layout) => layout.m,
            Compressor::HPool(b) => b.m,
            Compressor::Agc { config, .. } => config.m,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CompressOptions {
    /// Zero-pad documents shorter than the budget instead of failing them.
    pub pad_short: bool,
}

/// Documents that failed to compress, each with its reason.
#[derive(Debug)]
pub struct CompressFailures(pub Vec<(String, Error)>);

impl fmt::Display for CompressFailures {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} document(s) failed to compress:", self.0.len())?;
        for (id, e) in &self.0 {
            writeln!(f, "  {id}: {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for CompressFailures {}

/// Compress one document with the given compressor.
pub fn compress_document(
    doc: &DocumentRecord,
    compressor: &Compressor<'_>,
    attention: Option<&AttentionSidecar>,
    options: CompressOptions,
) -> Result<EmbeddingMatrix> {
    let z = &doc.embeddings;
    if z.is_empty() {
        return Err(Error::Contract("document has no tokens".into()));
    }
    let need = compressor.min_rows();
    let padded;
    let z = if options.pad_short && z.rows() < need {
        padded = z.zero_padded(need);
        &padded
    } else {
        z
    };
    match compressor {
        Compressor::SeqResize(w) => parametric::seq_resize(z, w),
        Compressor::MemTok(layout) => parametric::mem_tok_extract(z, *layout),
        Compressor::HPool(budget) => {
            let protected: Vec<usize> = (0..budget.protected).collect();
            hpool::h_pool(z, *budget, &protected)
        }
        Compressor::Agc { config, .. } => {
            let att = attention.ok_or_else(|| {
                Error::Consistency(format!("no attention sidecar for doc {:?}", doc.doc_id))
            })?;
            let att = if att.n() < z.rows() {
                att.zero_padded(z.rows())
            } else {
                att.clone()
            };
            let mut cfg = *config;
            if let Selection::Random { seed } = cfg.selection {
                cfg.selection = Selection::Random {
                    seed: derive_seed(seed, &doc.doc_id),
                };
            }
            agc::agc_compress(z, &att, &cfg)
        }
    }
}

/// Compress every document in parallel, preserving corpus order.
///
/// Output is independent of the worker count. Any failing document fails the whole call.
pub fn compress_corpus(
    corpus: &Corpus,
    compressor: &Compressor<'_>,
    options: CompressOptions,
) -> std::result::Result<(Corpus, CompressionMeta), CompressFailures> {
    let wrap = |e: Error| CompressFailures(vec![(String::new(), e)]);
    let budget = compressor.budget().map_err(wrap)?;
    let attention: HashMap<&str, &AttentionSidecar> = match compressor {
        Compressor::Agc { attention, .. } => attention.iter().map(|s| (s.doc_id(), s)).collect(),
        _ => HashMap::new(),
    };
    let results: Vec<Result<DocumentRecord>> = corpus
        .docs()
        .par_iter()
        .map(|doc| {
            let att = attention.get(doc.doc_id.as_str()).copied();
            if let (Some(a), false) = (att, options.pad_short) {
                if a.n() != doc.embeddings.rows() {
                    return Err(Error::Consistency(format!(
                        "attention covers {} positions, document has {} tokens",
                        a.n(),
                        doc.embeddings.rows()
                    )));
                }
            }
            let compressed = compress_document(doc, compressor, att, options)?;
            Ok(DocumentRecord {
                doc_id: doc.doc_id.clone(),
                embeddings: compressed,
            })
        })
        .collect();

    let mut docs = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (doc, r) in corpus.docs().iter().zip(results) {
        match r {
            Ok(d) => docs.push(d),
            Err(e) => failures.push((doc.doc_id.clone(), e)),
        }
    }
    if !failures.is_empty() {
        return Err(CompressFailures(failures));
    }
    let agc = match compressor {
        Compressor::Agc { config, .. } => Some(*config),
        _ => None,
    };
    let out = Corpus::new(corpus.dim(), docs).map_err(wrap)?;
    let meta =
        CompressionMeta::describe(compressor.method(), budget, agc, corpus, options.pad_short)
            .map_err(wrap)?;
    Ok((out, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_validation() {
        assert!(ClusterPartition::from_assignments(vec![0, 2], 3).is_err());
        assert!(ClusterPartition::from_assignments(vec![0, 3], 3).is_err());
        let p = ClusterPartition::from_assignments(vec![1, 0, 1], 2).unwrap();
        assert_eq!(p.sizes(), &[1, 2]);
        assert_eq!(p.clusters(), vec![vec![1], vec![0, 2]]);
        assert!(!p.is_canonical());
        assert!(ClusterPartition::from_assignments(vec![0, 1, 0, 2], 3)
            .unwrap()
            .is_canonical());
    }

    fn corpus(rows: &[usize]) -> Corpus {
        let docs = rows
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let data = (0..n * 2)
                    .map(|v| (v as f32 * 0.37 + i as f32).sin())
                    .collect();
                DocumentRecord::new(format!("d{i}"), EmbeddingMatrix::new(n, 2, data).unwrap())
                    .unwrap()
            })
            .collect();
        Corpus::new(2, docs).unwrap()
    }

    #[test]
    fn hpool_corpus_and_meta() {
        let c = corpus(&[5, 3, 4]);
        let (out, meta) = compress_corpus(
            &c,
            &Compressor::HPool(Budget::plain(2).unwrap()),
            Default::default(),
        )
        .unwrap();
        assert!(out.docs().iter().all(|d| d.embeddings.rows() == 2));
        assert_eq!(meta.method, Method::HPool);
        assert_eq!(meta.avg_source_tokens, 4.0);
        assert_eq!(meta.ratio, Some(0.5));
    }

    #[test]
    fn short_docs_fail_or_pad() {
        let c = corpus(&[5, 1]);
        let comp = Compressor::HPool(Budget::plain(3).unwrap());
        let err = compress_corpus(&c, &comp, Default::default()).unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert_eq!(err.0[0].0, "d1");
        let (out, meta) = compress_corpus(&c, &comp, CompressOptions { pad_short: true }).unwrap();
        assert_eq!(out.docs()[1].embeddings.rows(), 3);
        assert!(meta.pad_short);
    }

    #[test]
    fn empty_docs_always_fail() {
        let c = corpus(&[0]);
        let comp = Compressor::HPool(Budget::plain(1).unwrap());
        assert!(compress_corpus(&c, &comp, CompressOptions { pad_short: true }).is_err());
    }

    #[test]
    fn agc_requires_attention() {
        let c = corpus(&[4]);
        let comp = Compressor::Agc {
            config: AgcConfig::full(2),
            attention: &[],
        };
        assert!(compress_corpus(&c, &comp, Default::default()).is_err());
    }
}
