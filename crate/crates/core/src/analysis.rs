//! Index-utilization analytics over MaxSim match records.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::index::FlatIndex;
use crate::matrix::{cosine, SquareMatrix};
use crate::scoring::MatchRecord;

/// How per-position match strength is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrengthNorm {
    /// Divide each position's similarity sum by the total record count.
    #[default]
    Global,
    /// Normalize within each query position by its record count, then average
    /// over query positions.
    PerQueryPosition,
}

/// Summed similarity of the matches landing on each document position.
///
/// Under [`StrengthNorm::Global`] the vector sums to the mean match similarity.
pub fn matching_strength(
    matches: &[MatchRecord],
    doc_len: usize,
    norm: StrengthNorm,
) -> Result<Vec<f64>> {
    let mut strength = vec![0.0; doc_len];
    if matches.is_empty() {
        return Ok(strength);
    }
    if let Some(r) = matches.iter().find(|r| r.doc_pos >= doc_len) {
        return Err(Error::Contract(format!(
            "match at doc position {} outside document length {doc_len}",
            r.doc_pos
        )));
    }
    match norm {
        StrengthNorm::Global => {
            for r in matches {
                strength[r.doc_pos] += r.similarity;
            }
            let total = matches.len() as f64;
            strength.iter_mut().for_each(|s| *s /= total);
        }
        StrengthNorm::PerQueryPosition => {
            let mut by_qpos: BTreeMap<usize, (Vec<f64>, usize)> = BTreeMap::new();
            for r in matches {
                let (sums, count) = by_qpos
                    .entry(r.query_pos)
                    .or_insert_with(|| (vec![0.0; doc_len], 0));
                sums[r.doc_pos] += r.similarity;
                *count += 1;
            }
            let positions = by_qpos.len() as f64;
            for (sums, count) in by_qpos.values() {
                for (s, v) in strength.iter_mut().zip(sums) {
                    *s += v / *count as f64;
                }
            }
            strength.iter_mut().for_each(|s| *s /= positions);
        }
    }
    Ok(strength)
}

/// Share of the index's vectors that won at least one MaxSim match.
pub fn utilization_fraction(matches: &[MatchRecord], index: &FlatIndex) -> f64 {
    let total = index.total_vectors();
    if total == 0 {
        return 0.0;
    }
    let used: HashSet<(&str, usize)> = matches
        .iter()
        .map(|r| (r.doc_id.as_str(), r.doc_pos))
        .collect();
    used.len() as f64 / total as f64
}

/// Cosine similarity between vector slots `a` and `b`, averaged over documents.
///
/// Every document must have the same number of vectors.
pub fn mean_pairwise_cosine(index: &FlatIndex) -> Result<SquareMatrix> {
    let docs = index.corpus().docs();
    let m = docs
        .first()
        .map(|d| d.embeddings.rows())
        .ok_or_else(|| Error::Contract("index has no documents".into()))?;
    if let Some(d) = docs.iter().find(|d| d.embeddings.rows() != m) {
        return Err(Error::Contract(format!(
            "doc {:?} has {} vectors, expected a uniform {m}",
            d.doc_id,
            d.embeddings.rows()
        )));
    }
    let mut acc = SquareMatrix::zeros(m);
    for d in docs {
        let e = &d.embeddings;
        for a in 0..m {
            for b in a..m {
                let c = cosine(e.row(a), e.row(b));
                acc.set(a, b, acc.get(a, b) + c);
                if a != b {
                    acc.set(b, a, acc.get(b, a) + c);
                }
            }
        }
    }
    let count = docs.len() as f64;
    let mut out = SquareMatrix::zeros(m);
    for a in 0..m {
        for b in 0..m {
            out.set(a, b, acc.get(a, b) / count);
        }
    }
    Ok(out)
}

/// Coefficient of variation in percent, using the population standard deviation.
pub fn cv(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Computation("cv of an empty sample".into()));
    }
    let n = samples.len() as f64;
    let mu = samples.iter().sum::<f64>() / n;
    if mu == 0.0 {
        return Err(Error::Computation("cv is undefined for a zero mean".into()));
    }
    let var = samples.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n;
    Ok(var.sqrt() / mu * 100.0)
}

/// `G = 2 Σ i·x_(i) / (n Σ x) − (n + 1) / n` over ascending samples, `i` from 1.
pub fn gini(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Computation("gini of an empty sample".into()));
    }
    if let Some(x) = samples.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::Computation(format!(
            "gini needs nonnegative samples, got {x}"
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let total: f64 = sorted.iter().sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let n = sorted.len() as f64;
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| (i + 1) as f64 * x)
        .sum();
    Ok(2.0 * weighted / (n * total) - (n + 1.0) / n)
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Computation(format!(
            "pearson needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Computation(
            "pearson needs at least two points".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Computation(
            "pearson is undefined for a constant series".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    /// Two-sided, from Student's t with `n − 2` degrees of freedom.
    pub p_value: f64,
    pub n: usize,
}

/// Pearson `r` with its two-sided significance test. Needs at least three points.
pub fn pearson_test(x: &[f64], y: &[f64]) -> Result<Correlation> {
    let r = pearson(x, y)?;
    let n = x.len();
    if n < 3 {
        return Err(Error::Computation(
            "a p-value needs at least three points".into(),
        ));
    }
    let df = (n - 2) as f64;
    let p_value = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df)
            .map_err(|e| Error::Computation(format!("t distribution: {e}")))?;
        2.0 * dist.sf(t.abs())
    };
    Ok(Correlation { r, p_value, n })
}

/// Evenness of a strength distribution; lower means more even.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvennessReport {
    /// Percent.
    pub cv: f64,
    pub gini: f64,
    pub sample_count: usize,
}

pub fn evenness(samples: &[f64]) -> Result<EvennessReport> {
    Ok(EvennessReport {
        cv: cv(samples)?,
        gini: gini(samples)?,
        sample_count: samples.len(),
    })
}
