//! Compression budget and the provenance record written next to compressed corpora.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compress::agc::AgcConfig;
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::eval::compression_ratio;
use crate::format::mvec;

/// Fixed vector budget per document, with `protected` tokens exempt from pooling (H-Pool only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub m: usize,
    #[serde(default)]
    pub protected: usize,
}

impl Budget {
    pub fn new(m: usize, protected: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Contract("budget m must be at least 1".into()));
        }
        if protected >= m {
            return Err(Error::Contract(format!(
                "protected token count {protected} must be below the budget {m}"
            )));
        }
        Ok(Self { m, protected })
    }

    pub fn plain(m: usize) -> Result<Self> {
        Self::new(m, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    SeqResize,
    MemTok,
    HPool,
    Agc,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::SeqResize => "seq-resize",
            Method::MemTok => "mem-tok",
            Method::HPool => "h-pool",
            Method::Agc => "agc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionMeta {
    pub method: Method,
    pub budget: Budget,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agc: Option<AgcConfig>,
    /// Hex SHA-256 of the source corpus in MVEC encoding.
    pub source_fingerprint: String,
    pub avg_source_tokens: f64,
    /// `1 - m / avg_source_tokens` rounded to 4 decimals; absent for an empty source.
    pub ratio: Option<f64>,
    #[serde(default)]
    pub pad_short: bool,
}

impl CompressionMeta {
    pub fn describe(
        method: Method,
        budget: Budget,
        agc: Option<AgcConfig>,
        source: &Corpus,
        pad_short: bool,
    ) -> Result<Self> {
        let avg = source.avg_tokens().unwrap_or(0.0);
        let ratio = if avg > 0.0 {
            Some(round_to(compression_ratio(budget.m, avg)?, 4))
        } else {
            None
        };
        Ok(Self {
            method,
            budget,
            agc,
            source_fingerprint: mvec::fingerprint(source),
            avg_source_tokens: avg,
            ratio,
            pad_short,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("meta serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse {
            line: e.line(),
            reason: e.to_string(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// `<name>.meta.json` for a corpus file `<name>.mvec`.
pub fn meta_path_for(corpus_path: &Path) -> PathBuf {
    corpus_path.with_extension("meta.json")
}

pub(crate) fn round_to(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (x * scale).round() / scale
}
