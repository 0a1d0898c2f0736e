//! Attention-guided clustering.
//!
//! 1. Saliency: average attention from the universal query tokens over tokens and heads.
//! 2. The `m` most salient tokens become centroids (kept in ascending token order).
//! 3. Every token joins the centroid with the highest cosine similarity.
//! 4. Each cluster is reduced to its saliency-weighted mean.
//!
//! [`AgcConfig`] also exposes the ablations: random centroid selection, unweighted
//! means, and no clustering (the selected tokens are emitted as-is).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::AttentionSidecar;
use crate::compress::ClusterPartition;
use crate::error::{Error, Result};
use crate::matrix::{cosine, EmbeddingMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Selection {
    Attention,
    /// Uniform sampling without replacement. The seed is mixed with each doc id.
    Random {
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    Weighted,
    Unweighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Clustering {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgcConfig {
    pub m: usize,
    pub selection: Selection,
    pub aggregation: Aggregation,
    pub clustering: Clustering,
}

impl AgcConfig {
    /// The full method: attention selection, clustering, weighted aggregation.
    pub fn full(m: usize) -> Self {
        Self {
            m,
            selection: Selection::Attention,
            aggregation: Aggregation::Weighted,
            clustering: Clustering::On,
        }
    }
}

/// Per-token saliency `α`, nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyVector(Vec<f64>);

impl SaliencyVector {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if let Some(a) = alpha.iter().find(|a| !a.is_finite() || **a < 0.0) {
            return Err(Error::Validation(format!(
                "saliency value {a} is not a nonnegative number"
            )));
        }
        Ok(Self(alpha))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn saliency(att: &AttentionSidecar) -> SaliencyVector {
    let mut alpha = vec![0.0f64; att.n()];
    for q in 0..att.psi() {
        for h in 0..att.heads() {
            for (a, &w) in alpha.iter_mut().zip(att.row(q, h)) {
                *a += w as f64;
            }
        }
    }
    let rows = (att.psi() * att.heads()) as f64;
    alpha.iter_mut().for_each(|a| *a /= rows);
    SaliencyVector(alpha)
}

/// Indices of the `m` largest saliencies (ties to the lower index), ascending,
/// and the corresponding token rows.
pub fn select_centroids(
    alpha: &SaliencyVector,
    z: &EmbeddingMatrix,
    m: usize,
) -> Result<(Vec<usize>, EmbeddingMatrix)> {
    let n = z.rows();
    if alpha.len() != n {
        return Err(Error::Consistency(format!(
            "saliency has {} entries for {n} tokens",
            alpha.len()
        )));
    }
    check_budget(n, m)?;
    let a = alpha.as_slice();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j].total_cmp(&a[i]).then(i.cmp(&j)));
    order.truncate(m);
    order.sort_unstable();
    let centroids = z.select_rows(&order);
    Ok((order, centroids))
}

/// `m` distinct positions drawn uniformly from `0..n`, ascending.
pub fn select_random(n: usize, m: usize, seed: u64) -> Result<Vec<usize>> {
    check_budget(n, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, m).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

fn check_budget(n: usize, m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::Contract("budget m must be at least 1".into()));
    }
    if n < m {
        return Err(Error::Contract(format!(
            "document has {n} tokens, fewer than the budget {m}"
        )));
    }
    Ok(())
}

/// Hard-assign every token to its most cosine-similar centroid.
///
/// Centroid tokens always join their own cluster; other ties go to the lower cluster.
pub fn assign_clusters(z: &EmbeddingMatrix, indices: &[usize]) -> Result<ClusterPartition> {
    let n = z.rows();
    if indices.is_empty() {
        return Err(Error::Contract("no centroids given".into()));
    }
    let mut own = vec![None; n];
    for (k, &j) in indices.iter().enumerate() {
        if j >= n {
            return Err(Error::Contract(format!(
                "centroid index {j} out of range for {n} tokens"
            )));
        }
        if own[j].replace(k).is_some() {
            return Err(Error::Contract(format!("centroid index {j} repeated")));
        }
    }
    let assignments = (0..n)
        .map(|j| {
            own[j].unwrap_or_else(|| {
                let zj = z.row(j);
                let mut best = (0, f64::NEG_INFINITY);
                for (k, &c) in indices.iter().enumerate() {
                    let s = cosine(zj, z.row(c));
                    if s > best.1 {
                        best = (k, s);
                    }
                }
                best.0
            })
        })
        .collect();
    ClusterPartition::from_assignments(assignments, indices.len())
}

/// Per-cluster `(token, coefficient)` lists; each list is nonnegative and sums to 1.
///
/// A weighted cluster whose saliency mass is zero falls back to equal weights.
pub fn aggregation_coefficients(
    alpha: &SaliencyVector,
    partition: &ClusterPartition,
    mode: Aggregation,
) -> Vec<Vec<(usize, f64)>> {
    let a = alpha.as_slice();
    partition
        .clusters()
        .into_iter()
        .map(|members| {
            let mass: f64 = members.iter().map(|&j| a[j]).sum();
            let uniform = 1.0 / members.len() as f64;
            members
                .into_iter()
                .map(|j| match mode {
                    Aggregation::Weighted if mass > 0.0 => (j, a[j] / mass),
                    _ => (j, uniform),
                })
                .collect()
        })
        .collect()
}

pub fn aggregate(
    z: &EmbeddingMatrix,
    alpha: &SaliencyVector,
    partition: &ClusterPartition,
    mode: Aggregation,
) -> Result<EmbeddingMatrix> {
    if partition.len() != z.rows() || alpha.len() != z.rows() {
        return Err(Error::Contract(format!(
            "partition covers {} tokens and saliency {} tokens, document has {}",
            partition.len(),
            alpha.len(),
            z.rows()
        )));
    }
    let h = z.dim();
    let coeffs = aggregation_coefficients(alpha, partition, mode);
    let mut values = vec![0.0f64; coeffs.len() * h];
    for (out, cluster) in values.chunks_exact_mut(h).zip(&coeffs) {
        for &(j, w) in cluster {
            for (o, &v) in out.iter_mut().zip(z.row(j)) {
                *o += w * v as f64;
            }
        }
    }
    EmbeddingMatrix::from_f64_rows(coeffs.len(), h, &values)
}

/// Intermediate results of one AGC run.
#[derive(Debug, Clone, PartialEq)]
pub struct AgcOutput {
    pub saliency: SaliencyVector,
    pub centroids: Vec<usize>,
    /// `None` when clustering is off.
    pub partition: Option<ClusterPartition>,
    pub compressed: EmbeddingMatrix,
}

pub fn agc_compress(
    z: &EmbeddingMatrix,
    att: &AttentionSidecar,
    cfg: &AgcConfig,
) -> Result<EmbeddingMatrix> {
    Ok(agc_compress_detailed(z, att, cfg)?.compressed)
}

pub fn agc_compress_detailed(
    z: &EmbeddingMatrix,
    att: &AttentionSidecar,
    cfg: &AgcConfig,
) -> Result<AgcOutput> {
    let n = z.rows();
    if n == 0 {
        return Err(Error::Contract("cannot compress an empty document".into()));
    }
    if att.n() != n {
        return Err(Error::Consistency(format!(
            "attention covers {} positions, document has {n} tokens",
            att.n()
        )));
    }
    let alpha = saliency(att);
    let centroids = match cfg.selection {
        Selection::Attention => select_centroids(&alpha, z, cfg.m)?.0,
        Selection::Random { seed } => select_random(n, cfg.m, seed)?,
    };
    let (partition, compressed) = match cfg.clustering {
        Clustering::Off => (None, z.select_rows(&centroids)),
        Clustering::On => {
            let p = assign_clusters(z, &centroids)?;
            let c = aggregate(z, &alpha, &p, cfg.aggregation)?;
            (Some(p), c)
        }
    };
    Ok(AgcOutput {
        saliency: alpha,
        centroids,
        partition,
        compressed,
    })
}
