//! TREC run and qrels files.
//!
//! Run lines are `qid Q0 docid rank score tag` with the score printed to 6 decimals.
//! Qrels lines are `qid 0 docid grade`. Fields are whitespace-separated.

use std::fs;
use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Error, Result};

/// Graded relevance judgments. Grade ≥ 1 counts as relevant.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: IndexMap<String, IndexMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add a judgment; a repeated `(query, doc)` pair is rejected.
    pub fn insert(&mut self, query_id: &str, doc_id: &str, grade: u32) -> Result<()> {
        let docs = self.judgments.entry(query_id.to_string()).or_default();
        if docs.insert(doc_id.to_string(), grade).is_some() {
            return Err(Error::Validation(format!(
                "duplicate judgment for ({query_id}, {doc_id})"
            )));
        }
        Ok(())
    }

    /// Grade of a pair; unjudged pairs are 0.
    pub fn grade(&self, query_id: &str, doc_id: &str) -> u32 {
        self.judgments
            .get(query_id)
            .and_then(|d| d.get(doc_id))
            .copied()
            .unwrap_or(0)
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    /// All judgments for a query, in file order.
    pub fn judged(&self, query_id: &str) -> impl Iterator<Item = (&str, u32)> {
        self.judgments
            .get(query_id)
            .into_iter()
            .flat_map(|d| d.iter().map(|(k, &g)| (k.as_str(), g)))
    }

    pub fn relevant(&self, query_id: &str) -> impl Iterator<Item = &str> {
        self.judged(query_id)
            .filter(|&(_, g)| g >= 1)
            .map(|(d, _)| d)
    }

    pub fn is_relevant(&self, query_id: &str, doc_id: &str) -> bool {
        self.grade(query_id, doc_id) >= 1
    }

    pub fn len(&self) -> usize {
        self.judgments.values().map(IndexMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn parse_qrels(text: &str) -> Result<Qrels> {
    let mut qrels = Qrels::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                reason: format!(
                    "expected 4 fields `qid 0 docid grade`, found {}",
                    fields.len()
                ),
            });
        }
        let grade: u32 = fields[3].parse().map_err(|_| Error::Parse {
            line: line_no,
            reason: format!("grade {:?} is not a nonnegative integer", fields[3]),
        })?;
        qrels
            .insert(fields[0], fields[2], grade)
            .map_err(|e| Error::Parse {
                line: line_no,
                reason: e.to_string(),
            })?;
    }
    Ok(qrels)
}

pub fn format_qrels(qrels: &Qrels) -> String {
    let mut out = String::new();
    for (q, docs) in &qrels.judgments {
        for (d, g) in docs {
            out.push_str(&format!("{q} 0 {d} {g}\n"));
        }
    }
    out
}

pub fn read_qrels(path: &Path) -> Result<Qrels> {
    parse_qrels(&fs::read_to_string(path)?)
}

pub fn write_qrels(qrels: &Qrels, path: &Path) -> Result<()> {
    fs::write(path, format_qrels(qrels))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedDoc {
    pub doc_id: String,
    /// 1-based.
    pub rank: usize,
    pub score: f64,
}

/// Ranked results per query, in query insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunList {
    pub tag: String,
    queries: IndexMap<String, Vec<RankedDoc>>,
}

impl RunList {
    pub fn new(tag: impl Into<String>) -> Self {
        Self {
            tag: tag.into(),
            queries: IndexMap::new(),
        }
    }

    /// Rank `(doc_id, score)` pairs by score descending, ties by ascending doc id,
    /// keep the top `k`.
    pub fn rank(mut scored: Vec<(String, f64)>, k: usize) -> Vec<RankedDoc> {
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored
            .into_iter()
            .take(k)
            .enumerate()
            .map(|(i, (doc_id, score))| RankedDoc {
                doc_id,
                rank: i + 1,
                score,
            })
            .collect()
    }

    pub fn insert(&mut self, query_id: impl Into<String>, results: Vec<RankedDoc>) {
        self.queries.insert(query_id.into(), results);
    }

    pub fn get(&self, query_id: &str) -> Option<&[RankedDoc]> {
        self.queries.get(query_id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[RankedDoc])> {
        self.queries.iter().map(|(q, r)| (q.as_str(), r.as_slice()))
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.queries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

pub fn format_run(run: &RunList) -> String {
    let mut out = String::new();
    for (q, results) in &run.queries {
        for r in results {
            out.push_str(&format!(
                "{q} Q0 {} {} {:.6} {}\n",
                r.doc_id, r.rank, r.score, run.tag
            ));
        }
    }
    out
}

/// Parse a run file. Results of each query are ordered by rank; all lines must share one tag.
pub fn parse_run(text: &str) -> Result<RunList> {
    let mut tag: Option<String> = None;
    let mut queries: IndexMap<String, Vec<RankedDoc>> = IndexMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let err = |reason: String| Error::Parse {
            line: line_no,
            reason,
        };
        if fields.len() != 6 {
            return Err(err(format!(
                "expected 6 fields `qid Q0 docid rank score tag`, found {}",
                fields.len()
            )));
        }
        let rank: usize = fields[3]
            .parse()
            .ok()
            .filter(|&r| r >= 1)
            .ok_or_else(|| err(format!("rank {:?} is not a positive integer", fields[3])))?;
        let score: f64 = fields[4]
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| err(format!("score {:?} is not a finite number", fields[4])))?;
        match &tag {
            None => tag = Some(fields[5].to_string()),
            Some(t) if t != fields[5] => {
                return Err(err(format!(
                    "run tag {:?} differs from earlier tag {t:?}",
                    fields[5]
                )))
            }
            Some(_) => {}
        }
        let results = queries.entry(fields[0].to_string()).or_default();
        if results.iter().any(|r| r.doc_id == fields[2]) {
            return Err(err(format!(
                "doc {:?} listed twice for query {:?}",
                fields[2], fields[0]
            )));
        }
        results.push(RankedDoc {
            doc_id: fields[2].to_string(),
            rank,
            score,
        });
    }
    for results in queries.values_mut() {
        results.sort_by_key(|r| r.rank);
    }
    Ok(RunList {
        tag: tag.unwrap_or_default(),
        queries,
    })
}

pub fn read_run(path: &Path) -> Result<RunList> {
    parse_run(&fs::read_to_string(path)?)
}

pub fn write_run(run: &RunList, path: &Path) -> Result<()> {
    fs::write(path, format_run(run))?;
    Ok(())
}
