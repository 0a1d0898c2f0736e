//! Synthetic corpora with redundant, noisy tokens around a few clean concepts.
//!
//! Each document holds `concepts` orthonormal vectors, each repeated `redundancy`
//! times with isotropic Gaussian noise, in shuffled order. The attention sidecar puts
//! 0.9 of every row's mass on one representative copy of each concept. Query `i`
//! is document `i`'s clean concepts and is judged relevant to that document only.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;

use crate::attention::AttentionSidecar;
use crate::corpus::{Corpus, DocumentRecord};
use crate::error::{Error, Result};
use crate::format::{matt, mvec};
use crate::matrix::EmbeddingMatrix;
use crate::seed::derive_seed;
use crate::trec::{write_qrels, Qrels};

const PSI: usize = 2;
const HEADS: usize = 2;
const CONCEPT_MASS: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub doc_count: usize,
    pub concepts: usize,
    pub redundancy: usize,
    pub sigma: f64,
    pub dim: usize,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.doc_count == 0 || self.concepts == 0 || self.redundancy == 0 || self.dim == 0 {
            return Err(Error::Contract(
                "synthetic corpus counts must all be at least 1".into(),
            ));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Contract(format!(
                "sigma must be finite and >= 0, got {}",
                self.sigma
            )));
        }
        if self.concepts > self.dim {
            return Err(Error::Contract(format!(
                "{} orthogonal concepts do not fit in dim {}",
                self.concepts, self.dim
            )));
        }
        Ok(())
    }

    pub fn tokens_per_doc(&self) -> usize {
        self.concepts * self.redundancy
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub corpus: Corpus,
    pub queries: Corpus,
    pub attention: Vec<AttentionSidecar>,
    pub qrels: Qrels,
}

pub fn doc_id(i: usize) -> String {
    format!("d{i:05}")
}

pub fn query_id(i: usize) -> String {
    format!("q{i:05}")
}

/// Gram-Schmidt on Gaussian draws; returns `k` orthonormal rows of length `dim`.
fn orthonormal(rng: &mut ChaCha8Rng, k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    while basis.len() < k {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        for b in &basis {
            let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    basis
}

struct SynthDoc {
    doc: DocumentRecord,
    query: DocumentRecord,
    attention: AttentionSidecar,
}

fn generate_doc(spec: &SynthSpec, i: usize) -> Result<SynthDoc> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &format!("synth/doc/{i}")));
    let (k, h, n) = (spec.concepts, spec.dim, spec.tokens_per_doc());
    let concepts = orthonormal(&mut rng, k, h);
    let noise = Normal::new(0.0, spec.sigma).map_err(|e| Error::Contract(e.to_string()))?;

    // Copy r of concept c starts at slot c * redundancy + r; copy 0 is the representative.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut data = vec![0.0f32; n * h];
    let mut is_rep = vec![false; n];
    for (slot, &pos) in order.iter().enumerate() {
        let c = slot / spec.redundancy;
        is_rep[pos] = slot % spec.redundancy == 0;
        for (d, &v) in data[pos * h..(pos + 1) * h].iter_mut().zip(&concepts[c]) {
            let jitter = if spec.sigma > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            *d = (v + jitter) as f32;
        }
    }

    let others = n - k;
    let base: Vec<f64> = is_rep
        .iter()
        .map(|&rep| match (rep, others) {
            (true, 0) => 1.0 / k as f64,
            (true, _) => CONCEPT_MASS / k as f64,
            (false, _) => (1.0 - CONCEPT_MASS) / others as f64,
        })
        .collect();
    let mut weights = Vec::with_capacity(PSI * HEADS * n);
    for _ in 0..PSI * HEADS {
        let row: Vec<f64> = base
            .iter()
            .map(|b| b * rng.random_range(0.8..1.2))
            .collect();
        let total: f64 = row.iter().sum();
        weights.extend(row.iter().map(|w| (w / total) as f32));
    }

    let clean: Vec<f32> = concepts.iter().flatten().map(|&v| v as f32).collect();
    Ok(SynthDoc {
        doc: DocumentRecord::new(doc_id(i), EmbeddingMatrix::new(n, h, data)?)?,
        query: DocumentRecord::new(query_id(i), EmbeddingMatrix::new(k, h, clean)?)?,
        attention: AttentionSidecar::new(doc_id(i), PSI, HEADS, n, weights)?,
    })
}

pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let docs: Vec<SynthDoc> = (0..spec.doc_count)
        .into_par_iter()
        .map(|i| generate_doc(spec, i))
        .collect::<Result<_>>()?;
    let mut qrels = Qrels::new();
    for i in 0..spec.doc_count {
        qrels.insert(&query_id(i), &doc_id(i), 1)?;
    }
    let mut corpus = Vec::with_capacity(docs.len());
    let mut queries = Vec::with_capacity(docs.len());
    let mut attention = Vec::with_capacity(docs.len());
    for d in docs {
        corpus.push(d.doc);
        queries.push(d.query);
        attention.push(d.attention);
    }
    Ok(SynthData {
        corpus: Corpus::new(spec.dim, corpus)?,
        queries: Corpus::new(spec.dim, queries)?,
        attention,
        qrels,
    })
}

/// Write `corpus.mvec`, `queries.mvec`, `attention.matt` and `qrels.txt` into `dir`.
pub fn write_synth(data: &SynthData, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    mvec::write_mvec(&data.corpus, &dir.join("corpus.mvec"))?;
    mvec::write_mvec(&data.queries, &dir.join("queries.mvec"))?;
    matt::write_attention(&data.attention, &dir.join("attention.matt"))?;
    write_qrels(&data.qrels, &dir.join("qrels.txt"))?;
    Ok(())
}
