//! JSON-lines match logs: one [`MatchRecord`] per line with fields `qid, qpos, did, dpos, sim`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scoring::MatchRecord;

pub fn format_matches(records: &[MatchRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("match record serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_matches(text: &str) -> Result<Vec<MatchRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: MatchRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if !rec.similarity.is_finite() {
            return Err(Error::Parse {
                line: i + 1,
                reason: "similarity is not finite".into(),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_matches(path: &Path) -> Result<Vec<MatchRecord>> {
    parse_matches(&fs::read_to_string(path)?)
}

pub fn write_matches(records: &[MatchRecord], path: &Path) -> Result<()> {
    fs::write(path, format_matches(records))?;
    Ok(())
}
