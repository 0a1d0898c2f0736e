//! Hierarchical pooling: Ward-linkage agglomerative clustering followed by mean pooling.
//!
//! Merges always take the pair with the smallest
//! `Δ = |A||B| / (|A|+|B|) · ‖μ_A − μ_B‖²`, computed in `f64` on raw centroids.
//! Equal Δ values are resolved by the smaller minimum member index of the first
//! cluster, then of the second.

use crate::compress::ClusterPartition;
use crate::error::{Error, Result};
use crate::matrix::{cosine, EmbeddingMatrix, SquareMatrix};
use crate::meta::Budget;

/// `r_ij = 1 − cos(x_i, x_j)`, with cosine taken as 0 for zero-norm rows.
pub fn cosine_distance_matrix(x: &EmbeddingMatrix) -> SquareMatrix {
    let n = x.rows();
    let mut r = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            let d = 1.0 - cosine(x.row(i), x.row(j));
            r.set(i, j, d);
            r.set(j, i, d);
        }
    }
    r
}

/// Increase in within-cluster squared error caused by merging two clusters.
pub fn ward_delta(size_a: usize, size_b: usize, mu_a: &[f64], mu_b: &[f64]) -> f64 {
    debug_assert_eq!(mu_a.len(), mu_b.len());
    let sq: f64 = mu_a.iter().zip(mu_b).map(|(a, b)| (a - b) * (a - b)).sum();
    let (na, nb) = (size_a as f64, size_b as f64);
    na * nb / (na + nb) * sq
}

/// Mean of the given rows in `f64`, summed in the order given.
pub(crate) fn centroid(x: &EmbeddingMatrix, members: &[usize]) -> Vec<f64> {
    let mut acc = vec![0.0f64; x.dim()];
    for &i in members {
        for (a, &v) in acc.iter_mut().zip(x.row(i)) {
            *a += v as f64;
        }
    }
    let size = members.len() as f64;
    acc.iter_mut().for_each(|a| *a /= size);
    acc
}

struct Cluster {
    members: Vec<usize>,
    centroid: Vec<f64>,
}

/// Ward agglomeration of all rows of `x` down to `k` clusters.
///
/// Keeps a table of pairwise Δ between live clusters and refreshes only the row of
/// the merged cluster after each step. Cluster slots are keyed by minimum member,
/// which a merge into the lower slot preserves.
pub fn ward_partition(x: &EmbeddingMatrix, k: usize) -> Result<ClusterPartition> {
    let n = x.rows();
    if k == 0 || k > n {
        return Err(Error::Contract(format!(
            "cannot form {k} clusters from {n} tokens"
        )));
    }
    let mut slots: Vec<Option<Cluster>> = (0..n)
        .map(|i| {
            Some(Cluster {
                members: vec![i],
                centroid: centroid(x, &[i]),
            })
        })
        .collect();
    let mut delta = SquareMatrix::zeros(n);
    for a in 0..n {
        for b in a + 1..n {
            let (ca, cb) = (slots[a].as_ref().unwrap(), slots[b].as_ref().unwrap());
            delta.set(a, b, ward_delta(1, 1, &ca.centroid, &cb.centroid));
        }
    }
    let mut live: Vec<usize> = (0..n).collect();

    while live.len() > k {
        let mut best = (f64::INFINITY, 0, 0);
        for (ia, &a) in live.iter().enumerate() {
            for &b in &live[ia + 1..] {
                let d = delta.get(a, b);
                if d < best.0 {
                    best = (d, a, b);
                }
            }
        }
        let (_, a, b) = best;
        let absorbed = slots[b].take().expect("live slot");
        let target = slots[a].as_mut().expect("live slot");
        target.members.extend(absorbed.members);
        target.members.sort_unstable();
        target.centroid = centroid(x, &target.members);
        live.retain(|&s| s != b);

        let (size_a, mu_a) = (target.members.len(), target.centroid.clone());
        for &c in &live {
            if c == a {
                continue;
            }
            let other = slots[c].as_ref().unwrap();
            let d = ward_delta(size_a, other.members.len(), &mu_a, &other.centroid);
            let (lo, hi) = if c < a { (c, a) } else { (a, c) };
            delta.set(lo, hi, d);
        }
    }

    let mut assignments = vec![0; n];
    for (label, &slot) in live.iter().enumerate() {
        for &i in &slots[slot].as_ref().unwrap().members {
            assignments[i] = label;
        }
    }
    ClusterPartition::from_assignments(assignments, k)
}

/// Literal O(n³) Ward agglomeration used to check [`ward_partition`].
///
/// Every step recomputes every centroid and every pairwise Δ from the member lists.
pub fn oracle_agglomerative(x: &EmbeddingMatrix, k: usize) -> Result<ClusterPartition> {
    let n = x.rows();
    if k == 0 || k > n {
        return Err(Error::Contract(format!(
            "cannot form {k} clusters from {n} tokens"
        )));
    }
    // Sorted member lists, kept ordered by minimum member.
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    while clusters.len() > k {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in 0..clusters.len() {
                if a == b {
                    continue;
                }
                let (lo, hi) = if clusters[a][0] < clusters[b][0] {
                    (a, b)
                } else {
                    (b, a)
                };
                let d = ward_delta(
                    clusters[lo].len(),
                    clusters[hi].len(),
                    &centroid(x, &clusters[lo]),
                    &centroid(x, &clusters[hi]),
                );
                let key = (d, clusters[lo][0], clusters[hi][0], lo, hi);
                let better = match best {
                    None => true,
                    Some(cur) => (key.0, key.1, key.2) < (cur.0, cur.1, cur.2),
                };
                if better {
                    best = Some(key);
                }
            }
        }
        let (_, _, _, lo, hi) = best.expect("at least two clusters");
        let moved = clusters.remove(hi);
        let lo = if hi < lo { lo - 1 } else { lo };
        clusters[lo].extend(moved);
        clusters[lo].sort_unstable();
        clusters.sort_by_key(|c| c[0]);
    }
    let mut assignments = vec![0; n];
    for (label, members) in clusters.iter().enumerate() {
        for &i in members {
            assignments[i] = label;
        }
    }
    ClusterPartition::from_assignments(assignments, k)
}

/// Compress `x` to exactly `budget.m` rows.
///
/// The `protected` rows skip clustering and are appended, in the given order, after
/// the `m − m′` cluster means.
pub fn h_pool(x: &EmbeddingMatrix, budget: Budget, protected: &[usize]) -> Result<EmbeddingMatrix> {
    let n = x.rows();
    if n == 0 {
        return Err(Error::Contract("cannot pool an empty document".into()));
    }
    if n < budget.m {
        return Err(Error::Contract(format!(
            "document has {n} tokens, fewer than the budget {}",
            budget.m
        )));
    }
    if protected.len() != budget.protected {
        return Err(Error::Contract(format!(
            "{} protected indices given, budget expects {}",
            protected.len(),
            budget.protected
        )));
    }
    let mut is_protected = vec![false; n];
    for &p in protected {
        if p >= n {
            return Err(Error::Contract(format!(
                "protected index {p} out of range for {n} tokens"
            )));
        }
        if std::mem::replace(&mut is_protected[p], true) {
            return Err(Error::Contract(format!("protected index {p} repeated")));
        }
    }
    let pool: Vec<usize> = (0..n).filter(|&i| !is_protected[i]).collect();
    let k = budget.m - budget.protected;
    let sub = x.select_rows(&pool);
    let partition = ward_partition(&sub, k)?;

    let mut values = Vec::with_capacity(k * x.dim());
    for members in partition.clusters() {
        values.extend(centroid(&sub, &members));
    }
    let pooled = EmbeddingMatrix::from_f64_rows(k, x.dim(), &values)?;
    pooled.vstack(&x.select_rows(protected))
}
