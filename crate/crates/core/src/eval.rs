//! Retrieval metrics and the compression-ratio bookkeeping.
//!
//! Per-query values are averaged in a fixed order: run queries first, then
//! judged queries missing from the run (which score 0).

use crate::error::{Error, Result};
use crate::trec::{Qrels, RankedDoc, RunList};

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Evaluation("k must be at least 1".into()));
    }
    Ok(())
}

fn evaluated_queries<'a>(run: &'a RunList, qrels: &'a Qrels) -> Vec<&'a str> {
    let mut out: Vec<&str> = run.query_ids().collect();
    out.extend(qrels.queries().filter(|q| run.get(q).is_none()));
    out
}

fn top_k<'a>(run: &'a RunList, query_id: &str, k: usize) -> &'a [RankedDoc] {
    let results = run.get(query_id).unwrap_or(&[]);
    &results[..results.len().min(k)]
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Fraction of relevant documents found in the top `k`, averaged over queries that
/// have at least one relevant document.
pub fn recall_at_k(run: &RunList, qrels: &Qrels, k: usize) -> Result<f64> {
    check_k(k)?;
    let per_query: Vec<f64> = qrels
        .queries()
        .filter_map(|q| {
            let relevant = qrels.relevant(q).count();
            if relevant == 0 {
                return None;
            }
            let found = top_k(run, q, k)
                .iter()
                .filter(|r| qrels.is_relevant(q, &r.doc_id))
                .count();
            Some(found as f64 / relevant as f64)
        })
        .collect();
    if per_query.is_empty() {
        return Err(Error::Evaluation("no query has a relevant document".into()));
    }
    Ok(mean(per_query.into_iter()))
}

/// nDCG@k for a single query with graded gains and a `log2(rank + 1)` discount.
pub fn ndcg_query(run: &RunList, qrels: &Qrels, query_id: &str, k: usize) -> f64 {
    let dcg: f64 = top_k(run, query_id, k)
        .iter()
        .enumerate()
        .map(|(i, r)| qrels.grade(query_id, &r.doc_id) as f64 / ((i + 2) as f64).log2())
        .sum();
    let mut ideal: Vec<u32> = qrels.judged(query_id).map(|(_, g)| g).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| g as f64 / ((i + 2) as f64).log2())
        .sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

pub fn ndcg_at_k(run: &RunList, qrels: &Qrels, k: usize) -> Result<f64> {
    check_k(k)?;
    Ok(mean(
        evaluated_queries(run, qrels)
            .into_iter()
            .map(|q| ndcg_query(run, qrels, q, k)),
    ))
}

/// Mean reciprocal rank of the first relevant document (0 when none is retrieved).
pub fn mrr(run: &RunList, qrels: &Qrels) -> f64 {
    mean(evaluated_queries(run, qrels).into_iter().map(|q| {
        run.get(q)
            .unwrap_or(&[])
            .iter()
            .enumerate()
            .find(|(_, r)| qrels.is_relevant(q, &r.doc_id))
            .map_or(0.0, |(i, _)| 1.0 / (i + 1) as f64)
    }))
}

/// `score / base · 100`, unrounded. Use [`format_percent`] for the one-decimal report.
pub fn percent_of_baseline(score: f64, base: f64) -> Result<f64> {
    if base.is_nan() || base <= 0.0 {
        return Err(Error::Evaluation(format!(
            "baseline score must be positive, got {base}"
        )));
    }
    Ok(score / base * 100.0)
}

/// One decimal, halves rounded away from zero.
pub fn format_percent(p: f64) -> String {
    format!("{:.1}", (p * 10.0).round() / 10.0)
}

/// `1 − m / avg_tokens`.
pub fn compression_ratio(m: usize, avg_tokens: f64) -> Result<f64> {
    if avg_tokens.is_nan() || avg_tokens <= 0.0 {
        return Err(Error::Evaluation(format!(
            "average token count must be positive, got {avg_tokens}"
        )));
    }
    Ok(1.0 - m as f64 / avg_tokens)
}

/// Ratio as a percentage with two decimals, e.g. `97.57`.
pub fn format_ratio_percent(ratio: f64) -> String {
    format!("{:.2}", (ratio * 1e4).round() / 100.0)
}
