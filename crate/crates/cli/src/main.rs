//! `mvpress`: compress multi-vector corpora, search them with MaxSim, and evaluate the results.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "mvpress", version, about)]
struct Cli {
    /// Worker threads for compression and search. Output does not depend on it.
    #[arg(long, global = true, env = "MVPRESS_THREADS", value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic corpus, queries, attention sidecar and qrels.
    GenSynth(GenSynthArgs),
    /// Compress every document of a corpus to a fixed number of vectors.
    Compress(CompressArgs),
    /// Validate a corpus as a flat index and store it.
    Index(IndexArgs),
    /// Exhaustive MaxSim search; writes a TREC run and optionally a match log.
    Search(SearchArgs),
    /// Score a TREC run against qrels.
    Eval(EvalArgs),
    /// Index utilization analytics from a match log.
    Analyze(AnalyzeArgs),
}

#[derive(clap::Args, Debug)]
struct GenSynthArgs {
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u32).range(1..))]
    docs: u32,
    /// Orthogonal concepts per document.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
    concepts: u32,
    /// Noisy copies of each concept.
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u32).range(1..))]
    redundancy: u32,
    #[arg(long, default_value_t = 0.05)]
    sigma: f64,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(1..))]
    dim: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum MethodArg {
    SeqResize,
    MemTok,
    HPool,
    Agc,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SelectArg {
    Attention,
    Random,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum WeightArg {
    Weighted,
    Unweighted,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Switch {
    On,
    Off,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum PadArg {
    Zero,
}

#[derive(clap::Args, Debug)]
struct CompressArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    budget: u32,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Attention sidecar (MATT), required for agc.
    #[arg(long, required_if_eq("method", "agc"))]
    attn: Option<PathBuf>,
    /// Resize weights (MRSZ), required for seq-resize.
    #[arg(long, required_if_eq("method", "seq-resize"))]
    weights: Option<PathBuf>,
    /// Leading tokens kept out of pooling (h-pool only).
    #[arg(long, default_value_t = 0)]
    protected: u32,
    #[arg(long, value_enum, default_value_t = SelectArg::Attention)]
    agc_select: SelectArg,
    #[arg(long, value_enum, default_value_t = WeightArg::Weighted)]
    agc_weight: WeightArg,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    agc_cluster: Switch,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pad documents shorter than the budget instead of failing.
    #[arg(long, value_enum)]
    pad_short: Option<PadArg>,
}

#[derive(clap::Args, Debug)]
struct IndexArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// L2-normalize every vector before indexing.
    #[arg(long)]
    normalize: bool,
}

#[derive(clap::Args, Debug)]
struct SearchArgs {
    #[arg(long)]
    index: PathBuf,
    /// Queries as an MVEC file; doc ids are used as query ids.
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    k: u32,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "mvpress")]
    tag: String,
    /// Write MaxSim match records (JSON lines) for the returned documents.
    #[arg(long)]
    matches: Option<PathBuf>,
    /// With --matches, also log matches for every relevant document in these qrels.
    #[arg(long, requires = "matches")]
    qrels: Option<PathBuf>,
    /// L2-normalize index and query vectors at load time.
    #[arg(long)]
    normalize: bool,
}

#[derive(clap::Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    /// Cutoffs for R@k and nDCG@k.
    #[arg(long = "k", value_delimiter = ',', default_values_t = [1u32, 5, 10], value_parser = clap::value_parser!(u32).range(1..))]
    ks: Vec<u32>,
    /// Baseline run for percent-of-baseline.
    #[arg(long)]
    baseline: Option<PathBuf>,
    /// Also write the metrics JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum NormArg {
    Global,
    PerQueryPosition,
}

#[derive(clap::Args, Debug)]
struct AnalyzeArgs {
    #[arg(long)]
    matches: PathBuf,
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Keep only matches on relevant query-document pairs.
    #[arg(long)]
    qrels: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = NormArg::Global)]
    strength_norm: NormArg,
    /// CSV of per-index retrieval metrics and evenness (`label,<metrics...>,cv,gini`)
    /// to correlate retrieval against 1/evenness.
    #[arg(long)]
    correlate: Option<PathBuf>,
}

/// A failure that should exit with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::GenSynth(a) => commands::gen_synth(a),
        Command::Compress(a) => commands::compress(a),
        Command::Index(a) => commands::index(a),
        Command::Search(a) => commands::search(a),
        Command::Eval(a) => commands::eval(a),
        Command::Analyze(a) => commands::analyze(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("usage error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
