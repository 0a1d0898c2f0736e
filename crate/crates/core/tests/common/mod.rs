#![allow(dead_code)]

use mvpress_core::{AttentionSidecar, Corpus, DocumentRecord, EmbeddingMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut impl Rng, rows: usize, dim: usize) -> EmbeddingMatrix {
    let data = (0..rows * dim)
        .map(|_| rng.random_range(-1.0f32..=1.0))
        .collect();
    EmbeddingMatrix::new(rows, dim, data).unwrap()
}

pub fn uniform_attention(
    rng: &mut impl Rng,
    doc_id: &str,
    psi: usize,
    heads: usize,
    n: usize,
) -> AttentionSidecar {
    let weights = (0..psi * heads * n)
        .map(|_| rng.random_range(0.0f32..1.0))
        .collect();
    AttentionSidecar::new(doc_id, psi, heads, n, weights).unwrap()
}

pub fn random_corpus(rng: &mut impl Rng, docs: usize, max_rows: usize, dim: usize) -> Corpus {
    let docs = (0..docs)
        .map(|i| {
            let rows = rng.random_range(1..=max_rows);
            DocumentRecord::new(format!("doc{i:03}"), uniform_matrix(rng, rows, dim)).unwrap()
        })
        .collect();
    Corpus::new(dim, docs).unwrap()
}

/// Strategy for an `rows × dim` matrix with entries in [-1, 1].
pub fn matrix(
    rows: impl Into<prop::sample::SizeRange> + Clone,
    dim: usize,
) -> impl Strategy<Value = EmbeddingMatrix> {
    let rows: prop::sample::SizeRange = rows.into();
    let (lo, hi) = (rows.start(), rows.end_incl());
    (lo..=hi).prop_flat_map(move |r| {
        prop::collection::vec(-1.0f32..=1.0, r * dim)
            .prop_map(move |data| EmbeddingMatrix::new(r, dim, data).unwrap())
    })
}

/// Row `i` of the mean of the given member rows, accumulated in f64 in member order.
pub fn mean_rows(x: &EmbeddingMatrix, members: &[usize]) -> Vec<f64> {
    let mut acc = vec![0.0f64; x.dim()];
    for &j in members {
        for (a, &v) in acc.iter_mut().zip(x.row(j)) {
            *a += v as f64;
        }
    }
    acc.iter().map(|a| a / members.len() as f64).collect()
}

pub fn close(a: &[f32], b: &[f64], tol: f64) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(&x, &y)| (x as f64 - y).abs() <= tol * (1.0 + y.abs()))
}
