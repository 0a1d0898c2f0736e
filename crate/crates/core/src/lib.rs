//! Fixed-budget compression of multi-vector document embeddings and exhaustive
//! late-interaction (MaxSim) retrieval over the compressed index.
//!
//! Four compressors map a variable-length `n × h` document to exactly `m × h`:
//! sequence resizing and memory-token extraction (learned, inference only),
//! Ward hierarchical pooling, and attention-guided clustering. The crate also
//! evaluates retrieval runs and measures how evenly an index's vectors are used.

pub mod analysis;
pub mod attention;
pub mod compress;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod format;
pub mod index;
pub mod matchlog;
pub mod matrix;
pub mod meta;
pub mod scoring;
pub mod seed;
pub mod synth;
pub mod trec;

pub use attention::{check_attention, AttentionSidecar};
pub use compress::{compress_corpus, ClusterPartition, CompressOptions, Compressor};
pub use corpus::{Corpus, DocumentRecord};
pub use error::{Error, Result};
pub use index::{build_index, Capture, FlatIndex};
pub use matrix::{EmbeddingMatrix, SquareMatrix};
pub use meta::{Budget, CompressionMeta, Method};
pub use scoring::{maxsim_score, maxsim_with_matches, score_block, MatchRecord, ScoredDoc};
pub use trec::{Qrels, RankedDoc, RunList};
