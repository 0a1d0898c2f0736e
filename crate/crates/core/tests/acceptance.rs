//! Acceptance suite. Each test prints one `[PASS]`/`[FAIL]` line; run with
//! `cargo test -p mvpress-core --test acceptance -- --nocapture --test-threads=1`.

mod common;

use std::time::{Duration, Instant};

use mvpress_core::analysis::{cv, gini, matching_strength, pearson, StrengthNorm};
use mvpress_core::compress::agc::{
    agc_compress_detailed, aggregation_coefficients, AgcConfig, Aggregation, Clustering,
    SaliencyVector, Selection,
};
use mvpress_core::compress::hpool::{h_pool, oracle_agglomerative, ward_partition};
use mvpress_core::compress::parametric::{
    decode_resize_weights, encode_resize_weights, mem_tok_extract, seq_resize, MemTokLayout,
    ResizeWeights,
};
use mvpress_core::compress::{compress_document, CompressOptions};
use mvpress_core::eval::{
    compression_ratio, format_percent, format_ratio_percent, mrr, ndcg_at_k, percent_of_baseline,
    recall_at_k,
};
use mvpress_core::format::{matt, mvec};
use mvpress_core::synth::{self, SynthSpec};
use mvpress_core::{
    build_index, compress_corpus, matchlog, trec, AttentionSidecar, Budget, Capture,
    CompressOptions as Opts, Compressor, Corpus, DocumentRecord, EmbeddingMatrix, Error,
    MatchRecord, Qrels, RunList,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use common::{close, mean_rows, rng, uniform_attention, uniform_matrix};

fn report(id: u32, name: &str, pass: bool, detail: impl std::fmt::Display) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id:>2} {name}: {detail}");
}

fn quiet(cases: u32) -> Config {
    Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    }
}

fn with_threads<T: Send>(n: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .unwrap()
        .install(f)
}

// ---------------------------------------------------------------------------
// 1. Ward pooling against the literal agglomerative oracle

const WARD_INSTANCES: u64 = 240;
const WARD_LIMIT: Duration = Duration::from_secs(5);

fn ward_instance(seed: u64) -> (EmbeddingMatrix, usize) {
    let mut r = rng(seed);
    let n = r.random_range(1..=12);
    let h = r.random_range(1..=8);
    let mut x = uniform_matrix(&mut r, n, h);
    // every fourth instance repeats rows so merge costs tie exactly
    if seed.is_multiple_of(4) && n >= 3 {
        let mut data = x.data().to_vec();
        for i in (1..n).step_by(2) {
            let src = r.random_range(0..i);
            data.copy_within(src * h..(src + 1) * h, i * h);
        }
        x = EmbeddingMatrix::new(n, h, data).unwrap();
    }
    let k = r.random_range(1..=n);
    (x, k)
}

/// Serialized partitions and pooled rows for every instance, plus the mismatch count.
fn ward_run() -> (Vec<u8>, usize) {
    let results: Vec<(Vec<u8>, bool)> = (0..WARD_INSTANCES)
        .into_par_iter()
        .map(|seed| {
            let (x, k) = ward_instance(seed);
            let fast = ward_partition(&x, k).unwrap();
            let oracle = oracle_agglomerative(&x, k).unwrap();
            let pooled = h_pool(&x, Budget::plain(k).unwrap(), &[]).unwrap();
            let means_ok = oracle.clusters().iter().enumerate().all(|(c, members)| {
                let mean: Vec<f32> = mean_rows(&x, members).iter().map(|&v| v as f32).collect();
                pooled.row(c) == mean.as_slice()
            });
            let mut bytes: Vec<u8> = fast.assignments().iter().map(|&a| a as u8).collect();
            bytes.extend(pooled.data().iter().flat_map(|v| v.to_le_bytes()));
            (bytes, fast == oracle && pooled.rows() == k && means_ok)
        })
        .collect();
    let mismatches = results.iter().filter(|(_, ok)| !ok).count();
    (
        results.into_iter().flat_map(|(b, _)| b).collect(),
        mismatches,
    )
}

#[test]
fn criterion_01_ward_oracle_equivalence() {
    let start = Instant::now();
    let (_, mismatches) = with_threads(1, ward_run);
    let elapsed = start.elapsed();
    let pass = mismatches == 0 && elapsed < WARD_LIMIT;
    report(
        1,
        "ward oracle equivalence",
        pass,
        format!("{WARD_INSTANCES} instances, {mismatches} mismatches, {elapsed:.2?} (limit {WARD_LIMIT:?})"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 2. Blocked parallel MaxSim against a scalar double loop

const MAXSIM_CORPORA: u64 = 100;
const MAXSIM_LIMIT: Duration = Duration::from_secs(5);

fn naive_maxsim(q: &EmbeddingMatrix, d: &EmbeddingMatrix) -> f64 {
    let mut total = 0.0f64;
    for i in 0..q.rows() {
        let mut best = f64::NEG_INFINITY;
        for j in 0..d.rows() {
            let mut s = 0.0f64;
            for t in 0..q.dim() {
                s += q.row(i)[t] as f64 * d.row(j)[t] as f64;
            }
            if s > best {
                best = s;
            }
        }
        total += best;
    }
    total
}

fn maxsim_case(seed: u64) -> (Corpus, EmbeddingMatrix) {
    let mut r = rng(1_000 + seed);
    let docs = r.random_range(1..=50);
    let h = r.random_range(1..=16);
    let corpus = common::random_corpus(&mut r, docs, 40, h);
    let qn = r.random_range(1..=32);
    (corpus, uniform_matrix(&mut r, qn, h))
}

fn maxsim_run() -> (Vec<u8>, usize) {
    let mut out = Vec::new();
    let mut mismatches = 0;
    for seed in 0..MAXSIM_CORPORA {
        let (corpus, query) = maxsim_case(seed);
        let mut expected: Vec<(String, f64)> = corpus
            .docs()
            .iter()
            .map(|d| (d.doc_id.clone(), naive_maxsim(&query, &d.embeddings)))
            .collect();
        expected.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));

        let idx = build_index(corpus, None).unwrap();
        let got = idx
            .search("q", &query, idx.len(), Capture::None)
            .unwrap()
            .results;
        let same = got.len() == expected.len()
            && got
                .iter()
                .zip(&expected)
                .all(|(g, (id, s))| &g.doc_id == id && g.score.to_bits() == s.to_bits());
        if !same {
            mismatches += 1;
        }
        for g in &got {
            out.extend(g.doc_id.as_bytes());
            out.extend(g.score.to_bits().to_le_bytes());
        }
    }
    (out, mismatches)
}

#[test]
fn criterion_02_maxsim_kernel_equivalence() {
    let start = Instant::now();
    let (_, mismatches) = maxsim_run();
    let elapsed = start.elapsed();
    let pass = mismatches == 0 && elapsed < MAXSIM_LIMIT;
    report(
        2,
        "maxsim kernel equivalence",
        pass,
        format!("{MAXSIM_CORPORA} corpora, {mismatches} not bit-exact, {elapsed:.2?} (limit {MAXSIM_LIMIT:?})"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 3. Reported arithmetic

/// The one published percentage no single rounding rule reproduces: 56.9 / 55.7 is
/// 102.154...%, which prints as 102.2 at one decimal. Truncating would print 102.1
/// but would also turn 35.8 / 37.1 (96.496%) into 96.4 where 96.5 is published.
const UNREPRODUCIBLE_CELL: (f64, f64, &str) = (56.9, 55.7, "102.1");

#[test]
fn criterion_03_reported_arithmetic() {
    let ratios = [(32usize, 1318.0, "97.57"), (5, 1318.0, "99.62")];
    let percents = [
        (45.0, 46.2, "97.4"),
        (35.8, 37.1, "96.5"),
        UNREPRODUCIBLE_CELL,
    ];

    let mut lines = Vec::new();
    let mut failed = Vec::new();
    for (m, avg, want) in ratios {
        let got = format_ratio_percent(compression_ratio(m, avg).unwrap());
        lines.push(format!("({m}, {avg}) -> {got}% want {want}%"));
        if got != want {
            failed.push(want);
        }
    }
    for (s, b, want) in percents {
        let got = format_percent(percent_of_baseline(s, b).unwrap());
        lines.push(format!("{s}/{b} -> {got} want {want}"));
        if got != want {
            failed.push(want);
        }
    }
    report(
        3,
        "reported arithmetic",
        failed.is_empty(),
        lines.join("; "),
    );

    // Everything except the unreproducible cell must hold; that cell must fail the
    // way the arithmetic dictates rather than silently matching.
    assert_eq!(failed, [UNREPRODUCIBLE_CELL.2]);
    assert_eq!(
        format_percent(percent_of_baseline(56.9, 55.7).unwrap()),
        "102.2"
    );
}

#[test]
#[ignore = "published value 102.1 is not reachable by round-half-away arithmetic (computes 102.2)"]
fn criterion_03_published_cell_102_1() {
    let (s, b, want) = UNREPRODUCIBLE_CELL;
    assert_eq!(format_percent(percent_of_baseline(s, b).unwrap()), want);
}

// ---------------------------------------------------------------------------
// 4. Constant budget

const BUDGET_CASES: u32 = 1000;

#[derive(Debug, Clone)]
struct BudgetCase {
    doc: EmbeddingMatrix,
    m: usize,
    protected: usize,
    attention: AttentionSidecar,
    weights: ResizeWeights,
    variant: u8,
}

fn budget_case() -> impl Strategy<Value = BudgetCase> {
    (1usize..=30, 1usize..=8, any::<u64>()).prop_map(|(n, h, seed)| {
        let mut r = rng(seed);
        let doc = uniform_matrix(&mut r, n, h);
        let m = r.random_range(1..=n);
        let protected = r.random_range(0..m);
        let psi = r.random_range(1..=3);
        let heads = r.random_range(1..=3);
        let attention = uniform_attention(&mut r, "d", psi, heads, n);
        let n0 = r.random_range(1..=40);
        let hidden = r.random_range(1..=8);
        let w1 = (0..hidden * n0)
            .map(|_| r.random_range(-1.0f32..1.0))
            .collect();
        let w2 = (0..m * hidden)
            .map(|_| r.random_range(-1.0f32..1.0))
            .collect();
        let weights = ResizeWeights::new(n0, hidden, m, w1, w2).unwrap();
        BudgetCase {
            doc,
            m,
            protected,
            attention,
            weights,
            variant: r.random_range(0..8),
        }
    })
}

fn agc_variant(m: usize, v: u8) -> AgcConfig {
    AgcConfig {
        m,
        selection: if v & 1 == 0 {
            Selection::Attention
        } else {
            Selection::Random { seed: v as u64 }
        },
        aggregation: if v & 2 == 0 {
            Aggregation::Weighted
        } else {
            Aggregation::Unweighted
        },
        clustering: if v & 4 == 0 {
            Clustering::On
        } else {
            Clustering::Off
        },
    }
}

fn run_budget(
    method: &str,
    check: impl Fn(&BudgetCase) -> Result<usize, Error>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(quiet(BUDGET_CASES));
    runner
        .run(&budget_case(), |case| {
            let rows = check(&case).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert_eq!(rows, case.m);
            Ok(())
        })
        .map_err(|e| format!("{method}: {e}"))
}

#[test]
fn criterion_04_constant_budget() {
    let doc = |c: &BudgetCase| DocumentRecord::new("d", c.doc.clone()).unwrap();
    let opts = CompressOptions::default();
    let results = [
        run_budget("seq-resize", |c| Ok(seq_resize(&c.doc, &c.weights)?.rows())),
        run_budget("mem-tok", |c| {
            Ok(mem_tok_extract(&c.doc, MemTokLayout::suffix(c.m)?)?.rows())
        }),
        run_budget("h-pool", |c| {
            let budget = Budget::new(c.m, c.protected)?;
            Ok(compress_document(&doc(c), &Compressor::HPool(budget), None, opts)?.rows())
        }),
        run_budget("agc", |c| {
            let compressor = Compressor::Agc {
                config: agc_variant(c.m, c.variant),
                attention: std::slice::from_ref(&c.attention),
            };
            Ok(compress_document(&doc(c), &compressor, Some(&c.attention), opts)?.rows())
        }),
    ];
    let failures: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    report(
        4,
        "constant budget",
        failures.is_empty(),
        format!("{BUDGET_CASES} cases x 4 methods, failures: {failures:?}"),
    );
    assert!(failures.is_empty());
}

// ---------------------------------------------------------------------------
// 5. AGC structure

fn oracle_saliency(att: &AttentionSidecar) -> Vec<f64> {
    let mut out = vec![0.0; att.n()];
    for q in 0..att.psi() {
        for h in 0..att.heads() {
            for (o, &w) in out.iter_mut().zip(att.row(q, h)) {
                *o += w as f64;
            }
        }
    }
    let denom = (att.psi() * att.heads()) as f64;
    out.iter().map(|v| v / denom).collect()
}

fn cos(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    let na: f64 = a.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn agc_structure(seed: u64) -> Result<(), String> {
    let mut r = rng(5_000 + seed);
    let n = r.random_range(1..=30);
    let h = r.random_range(1..=8);
    let z = uniform_matrix(&mut r, n, h);
    let (psi, heads) = (r.random_range(1..=3), r.random_range(1..=3));
    let mut att = uniform_attention(&mut r, "d", psi, heads, n);
    if seed.is_multiple_of(3) {
        // coarse weights force saliency ties
        let w = att.weights().iter().map(|w| (w * 2.0).floor()).collect();
        att = AttentionSidecar::new("d", att.psi(), att.heads(), n, w).unwrap();
    }
    let m = r.random_range(1..=n);
    let full = agc_compress_detailed(&z, &att, &AgcConfig::full(m)).map_err(|e| e.to_string())?;

    let alpha = oracle_saliency(&att);
    if full
        .saliency
        .as_slice()
        .iter()
        .zip(&alpha)
        .any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err("saliency differs from the mean over query tokens and heads".into());
    }

    // top-m with ties to the lower index
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| alpha[j].partial_cmp(&alpha[i]).unwrap().then(i.cmp(&j)));
    let mut top: Vec<usize> = order[..m].to_vec();
    top.sort_unstable();
    if full.centroids != top {
        return Err(format!("centroids {:?}, expected {top:?}", full.centroids));
    }
    let again = agc_compress_detailed(&z, &att, &AgcConfig::full(m)).unwrap();
    if again != full {
        return Err("repeated run differs".into());
    }

    let part = full
        .partition
        .as_ref()
        .ok_or("clustering on produced no partition")?;
    if part.k() != m || part.sizes().contains(&0) {
        return Err(format!("cluster sizes {:?}", part.sizes()));
    }
    for (k, &c) in full.centroids.iter().enumerate() {
        if part.assignments()[c] != k {
            return Err(format!("centroid token {c} not in its own cluster {k}"));
        }
    }
    for (j, &a) in part.assignments().iter().enumerate() {
        if full.centroids.contains(&j) {
            continue;
        }
        let sims: Vec<f64> = full
            .centroids
            .iter()
            .map(|&c| cos(z.row(j), z.row(c)))
            .collect();
        let best = sims.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let first = sims.iter().position(|&s| s == best).unwrap();
        if a != first {
            return Err(format!(
                "token {j} assigned to {a}, nearest centroid is {first}"
            ));
        }
    }

    let sv = SaliencyVector::new(alpha.clone()).unwrap();
    for mode in [Aggregation::Weighted, Aggregation::Unweighted] {
        for cluster in aggregation_coefficients(&sv, part, mode) {
            let sum: f64 = cluster.iter().map(|(_, w)| w).sum();
            if cluster.iter().any(|&(_, w)| w < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(format!("{mode:?} coefficients not convex: sum {sum}"));
            }
        }
    }
    for (k, members) in part.clusters().iter().enumerate() {
        let mass: f64 = members.iter().map(|&j| alpha[j]).sum();
        let mut expect = vec![0.0f64; h];
        for &j in members {
            let w = if mass > 0.0 {
                alpha[j] / mass
            } else {
                1.0 / members.len() as f64
            };
            for (e, &v) in expect.iter_mut().zip(z.row(j)) {
                *e += w * v as f64;
            }
        }
        if !close(full.compressed.row(k), &expect, 1e-6) {
            return Err(format!(
                "weighted row {k} is not the saliency-weighted mean"
            ));
        }
    }

    let cfg = |aggregation, clustering| AgcConfig {
        m,
        selection: Selection::Attention,
        aggregation,
        clustering,
    };
    let off =
        agc_compress_detailed(&z, &att, &cfg(Aggregation::Weighted, Clustering::Off)).unwrap();
    if off.compressed != z.select_rows(&full.centroids) || off.partition.is_some() {
        return Err("clustering off is not the selected rows".into());
    }
    let plain =
        agc_compress_detailed(&z, &att, &cfg(Aggregation::Unweighted, Clustering::On)).unwrap();
    for (k, members) in part.clusters().iter().enumerate() {
        if !close(plain.compressed.row(k), &mean_rows(&z, members), 1e-6) {
            return Err(format!("unweighted row {k} is not the plain cluster mean"));
        }
    }
    Ok(())
}

#[test]
fn criterion_05_agc_structure() {
    let failures: Vec<(u64, String)> = (0..500)
        .filter_map(|s| agc_structure(s).err().map(|e| (s, e)))
        .collect();

    // all-equal saliency picks the first m tokens
    let mut r = rng(9);
    let z = uniform_matrix(&mut r, 10, 4);
    let flat = AttentionSidecar::new("d", 1, 1, 10, vec![0.5; 10]).unwrap();
    let chosen = agc_compress_detailed(&z, &flat, &AgcConfig::full(3))
        .unwrap()
        .centroids;
    let ties_ok = chosen == [0, 1, 2];

    let pass = failures.is_empty() && ties_ok;
    report(
        5,
        "agc structure",
        pass,
        format!(
            "500 documents, {} failures {:?}, flat-saliency picks {chosen:?}",
            failures.len(),
            failures.first()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 6. Synthetic end to end

const SYNTH_LIMIT: Duration = Duration::from_secs(60);

fn synth_spec(sigma: f64) -> SynthSpec {
    SynthSpec {
        doc_count: 200,
        concepts: 4,
        redundancy: 50,
        sigma,
        dim: 64,
        seed: 20_250_601,
    }
}

struct SynthOutcome {
    /// (label, R@1, floor)
    recalls: Vec<(String, f64, f64)>,
    bytes: Vec<u8>,
}

fn synth_run() -> SynthOutcome {
    let data = synth::generate(&synth_spec(0.05)).unwrap();
    let mut recalls = Vec::new();
    let mut bytes = Vec::new();
    for (m, floor) in [(8usize, 0.95), (4, 0.90)] {
        let agc = Compressor::Agc {
            config: AgcConfig::full(m),
            attention: &data.attention,
        };
        let hpool = Compressor::HPool(Budget::plain(m).unwrap());
        for (label, compressor) in [("agc", agc), ("h-pool", hpool)] {
            let (compressed, meta) =
                compress_corpus(&data.corpus, &compressor, Opts::default()).unwrap();
            bytes.extend(mvec::encode(&compressed).unwrap());
            let idx = build_index(compressed, Some(meta)).unwrap();
            let (run, _) = idx
                .search_many(&data.queries, 10, Capture::None, label)
                .unwrap();
            bytes.extend(trec::format_run(&run).into_bytes());
            recalls.push((
                format!("{label} m={m}"),
                recall_at_k(&run, &data.qrels, 1).unwrap(),
                floor,
            ));
        }
    }
    let clean = synth::generate(&synth_spec(0.0)).unwrap();
    let idx = build_index(clean.corpus, None).unwrap();
    let (run, _) = idx
        .search_many(&clean.queries, 10, Capture::None, "full")
        .unwrap();
    bytes.extend(trec::format_run(&run).into_bytes());
    recalls.push((
        "uncompressed sigma=0".into(),
        recall_at_k(&run, &clean.qrels, 1).unwrap(),
        1.0,
    ));
    SynthOutcome { recalls, bytes }
}

#[test]
fn criterion_06_synthetic_end_to_end() {
    let start = Instant::now();
    let outcome = with_threads(1, synth_run);
    let elapsed = start.elapsed();
    let all_met = outcome.recalls.iter().all(|(_, r, floor)| r >= floor);
    let pass = all_met && elapsed < SYNTH_LIMIT;
    let detail: Vec<String> = outcome
        .recalls
        .iter()
        .map(|(l, r, f)| format!("{l} R@1={r:.3} (>= {f})"))
        .collect();
    report(
        6,
        "synthetic end to end",
        pass,
        format!(
            "{}; {elapsed:.2?} single-threaded (limit {SYNTH_LIMIT:?})",
            detail.join(", ")
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 7. Metric formulas against direct evaluation

const METRIC_TOL: f64 = 1e-9;

struct RetrievalCase {
    run: RunList,
    qrels: Qrels,
    k: usize,
}

fn retrieval_case(seed: u64) -> RetrievalCase {
    let mut r = rng(7_000 + seed);
    let docs: Vec<String> = (0..12).map(|i| format!("d{i}")).collect();
    let mut run = RunList::new("t");
    let mut qrels = Qrels::new();
    for q in 0..r.random_range(1..=4) {
        let qid = format!("q{q}");
        if r.random_bool(0.85) {
            let mut pool = docs.clone();
            pool.shuffle(&mut r);
            let scored = pool
                .into_iter()
                .map(|d| (d, r.random_range(0.0..1.0)))
                .collect();
            run.insert(qid.clone(), RunList::rank(scored, r.random_range(1..=12)));
        }
        for d in &docs {
            if r.random_bool(0.3) {
                qrels.insert(&qid, d, r.random_range(0..=3)).unwrap();
            }
        }
    }
    if qrels.queries().all(|q| qrels.relevant(q).next().is_none()) {
        qrels.insert("q0", "d0", 1).unwrap();
    }
    RetrievalCase {
        run,
        qrels,
        k: r.random_range(1..=12),
    }
}

fn oracle_queries(c: &RetrievalCase) -> Vec<String> {
    let mut qs: Vec<String> = c.run.query_ids().map(String::from).collect();
    for q in c.qrels.queries() {
        if !qs.iter().any(|x| x == q) {
            qs.push(q.to_string());
        }
    }
    qs
}

fn ranked(c: &RetrievalCase, q: &str) -> Vec<String> {
    c.run
        .get(q)
        .map(|r| r.iter().map(|d| d.doc_id.clone()).collect())
        .unwrap_or_default()
}

fn oracle_recall(c: &RetrievalCase) -> f64 {
    let mut vals = Vec::new();
    for q in c.qrels.queries() {
        let rel: Vec<&str> = c
            .qrels
            .judged(q)
            .filter(|(_, g)| *g >= 1)
            .map(|(d, _)| d)
            .collect();
        if rel.is_empty() {
            continue;
        }
        let got = ranked(c, q)
            .iter()
            .take(c.k)
            .filter(|d| rel.contains(&d.as_str()))
            .count();
        vals.push(got as f64 / rel.len() as f64);
    }
    vals.iter().sum::<f64>() / vals.len() as f64
}

fn oracle_ndcg(c: &RetrievalCase) -> f64 {
    let qs = oracle_queries(c);
    let mut total = 0.0;
    for q in &qs {
        let docs = ranked(c, q);
        let mut dcg = 0.0;
        for (i, d) in docs.iter().take(c.k).enumerate() {
            let g = c
                .qrels
                .judged(q)
                .find(|(x, _)| x == d)
                .map_or(0, |(_, g)| g);
            dcg += g as f64 / (i as f64 + 2.0).log2();
        }
        let mut grades: Vec<u32> = c.qrels.judged(q).map(|(_, g)| g).collect();
        grades.sort_unstable_by(|a, b| b.cmp(a));
        let idcg: f64 = grades
            .iter()
            .take(c.k)
            .enumerate()
            .map(|(i, &g)| g as f64 / (i as f64 + 2.0).log2())
            .sum();
        total += if idcg > 0.0 { dcg / idcg } else { 0.0 };
    }
    total / qs.len() as f64
}

fn oracle_mrr(c: &RetrievalCase) -> f64 {
    let qs = oracle_queries(c);
    let mut total = 0.0;
    for q in &qs {
        for (i, d) in ranked(c, q).iter().enumerate() {
            if c.qrels.grade(q, d) >= 1 {
                total += 1.0 / (i + 1) as f64;
                break;
            }
        }
    }
    total / qs.len() as f64
}

fn oracle_cv(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mu = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n).sqrt();
    100.0 * sd / mu
}

fn oracle_gini(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mu = x.iter().sum::<f64>() / n;
    let diffs: f64 = x
        .iter()
        .flat_map(|a| x.iter().map(move |b| (a - b).abs()))
        .sum();
    diffs / (2.0 * n * n * mu)
}

fn oracle_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

#[test]
fn criterion_07_metric_formulas() {
    let mut worst: Vec<(&str, f64)> = vec![
        ("recall", 0.0),
        ("ndcg", 0.0),
        ("mrr", 0.0),
        ("cv", 0.0),
        ("gini", 0.0),
        ("pearson", 0.0),
    ];
    let mut bump = |name: &str, err: f64| {
        let slot = worst.iter_mut().find(|(n, _)| *n == name).unwrap();
        slot.1 = slot.1.max(err);
    };
    for seed in 0..100 {
        let c = retrieval_case(seed);
        bump(
            "recall",
            (recall_at_k(&c.run, &c.qrels, c.k).unwrap() - oracle_recall(&c)).abs(),
        );
        bump(
            "ndcg",
            (ndcg_at_k(&c.run, &c.qrels, c.k).unwrap() - oracle_ndcg(&c)).abs(),
        );
        bump("mrr", (mrr(&c.run, &c.qrels) - oracle_mrr(&c)).abs());

        let mut r = rng(8_000 + seed);
        let len = r.random_range(3..=20);
        let x: Vec<f64> = (0..len).map(|_| r.random_range(0.01..10.0)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| v * r.random_range(-2.0..2.0) + r.random_range(0.0..5.0))
            .collect();
        bump("cv", (cv(&x).unwrap() - oracle_cv(&x)).abs());
        bump("gini", (gini(&x).unwrap() - oracle_gini(&x)).abs());
        bump(
            "pearson",
            (pearson(&x, &y).unwrap() - oracle_pearson(&x, &y)).abs(),
        );
    }

    let mut one = Qrels::new();
    one.insert("q", "a", 1).unwrap();
    let mut run = RunList::new("t");
    run.insert(
        "q",
        RunList::rank(vec![("b".into(), 2.0), ("a".into(), 1.0)], 2),
    );
    let examples = [
        ("gini([0,1])", gini(&[0.0, 1.0]).unwrap(), 0.5),
        ("cv([0,2])", cv(&[0.0, 2.0]).unwrap(), 100.0),
        (
            "nDCG rank 2",
            ndcg_at_k(&run, &one, 2).unwrap(),
            1.0 / 3f64.log2(),
        ),
        ("MRR rank 2", mrr(&run, &one), 0.5),
    ];
    let examples_ok = examples
        .iter()
        .all(|(_, got, want)| (got - want).abs() <= METRIC_TOL);
    let pass = examples_ok && worst.iter().all(|(_, e)| *e <= METRIC_TOL);
    let errs: Vec<String> = worst.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect();
    report(
        7,
        "metric formulas",
        pass,
        format!(
            "100 cases each, max abs error {} (tol {METRIC_TOL:e}); examples ok: {examples_ok}",
            errs.join(", ")
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 8. Evenness invariants

fn evenness_props() -> Result<(), String> {
    let mut runner = TestRunner::new(quiet(512));
    let samples = prop::collection::vec(0.0f64..100.0, 1..40);
    runner
        .run(&(samples.clone(), 0.001f64..1000.0), |(x, c)| {
            let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
            let g = gini(&x).unwrap();
            let n = x.len() as f64;
            prop_assert!((gini(&scaled).unwrap() - g).abs() <= 1e-9, "gini scale");
            prop_assert!(g <= (n - 1.0) / n + 1e-12, "gini bound");
            prop_assert!(g >= -1e-12);
            if x.iter().sum::<f64>() > 0.0 {
                let (a, b) = (cv(&x).unwrap(), cv(&scaled).unwrap());
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "cv scale");
            }
            Ok(())
        })
        .map_err(|e| format!("gini/cv: {e}"))?;

    // the bound is reached when all mass sits on one position
    runner
        .run(&(1usize..40, 0.1f64..10.0), |(n, v)| {
            let mut x = vec![0.0; n];
            x[n - 1] = v;
            let bound = (n as f64 - 1.0) / n as f64;
            prop_assert!((gini(&x).unwrap() - bound).abs() <= 1e-12);
            Ok(())
        })
        .map_err(|e| format!("gini extreme: {e}"))?;

    let records = (1usize..12).prop_flat_map(|m| {
        prop::collection::vec((0usize..6, 0..m, -1.0f64..1.0), 1..80).prop_map(move |rs| (m, rs))
    });
    runner
        .run(&records, |(m, rs)| {
            let recs: Vec<MatchRecord> = rs
                .iter()
                .map(|&(qpos, dpos, sim)| MatchRecord {
                    query_id: "q".into(),
                    query_pos: qpos,
                    doc_id: "d".into(),
                    doc_pos: dpos,
                    similarity: sim,
                })
                .collect();
            let s = matching_strength(&recs, m, StrengthNorm::Global).unwrap();
            let mean = rs.iter().map(|r| r.2).sum::<f64>() / rs.len() as f64;
            prop_assert_eq!(s.len(), m);
            prop_assert!(
                (s.iter().sum::<f64>() - mean).abs() <= 1e-9,
                "strength conservation"
            );
            Ok(())
        })
        .map_err(|e| format!("matching strength: {e}"))
}

#[test]
fn criterion_08_evenness_invariants() {
    let outcome = evenness_props();
    report(
        8,
        "evenness invariants",
        outcome.is_ok(),
        outcome.as_ref().map_or_else(
            |e| e.clone(),
            |_| "gini scale/bound, cv scale, strength conservation hold".into(),
        ),
    );
    assert!(outcome.is_ok());
}

// ---------------------------------------------------------------------------
// 9. File formats

fn id_strategy() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9_.:-]{1,12}"
}

fn corpus_strategy() -> impl Strategy<Value = Corpus> {
    (1usize..6).prop_flat_map(|dim| {
        prop::collection::btree_map(
            id_strategy(),
            prop::collection::vec(-1e3f32..1e3, 0..5 * dim),
            0..6,
        )
        .prop_map(move |docs| {
            let docs = docs
                .into_iter()
                .map(|(id, mut v)| {
                    v.truncate(v.len() / dim * dim);
                    let rows = v.len() / dim;
                    DocumentRecord::new(id, EmbeddingMatrix::new(rows, dim, v).unwrap()).unwrap()
                })
                .collect();
            Corpus::new(dim, docs).unwrap()
        })
    })
}

fn attention_strategy() -> impl Strategy<Value = Vec<AttentionSidecar>> {
    prop::collection::btree_map(id_strategy(), (1usize..3, 1usize..3, 0usize..6), 0..5)
        .prop_flat_map(|m| {
            m.into_iter()
                .map(|(id, (p, h, n))| {
                    prop::collection::vec(0.0f32..1.0, p * h * n)
                        .prop_map(move |w| AttentionSidecar::new(id.clone(), p, h, n, w).unwrap())
                })
                .collect::<Vec<_>>()
        })
}

fn weights_strategy() -> impl Strategy<Value = ResizeWeights> {
    (1usize..6, 1usize..6, 1usize..6).prop_flat_map(|(n0, d, m)| {
        (
            prop::collection::vec(-5.0f32..5.0, d * n0),
            prop::collection::vec(-5.0f32..5.0, m * d),
        )
            .prop_map(move |(w1, w2)| ResizeWeights::new(n0, d, m, w1, w2).unwrap())
    })
}

fn matches_strategy() -> impl Strategy<Value = Vec<MatchRecord>> {
    prop::collection::vec(
        (
            id_strategy(),
            0usize..100,
            id_strategy(),
            0usize..100,
            -1e6f64..1e6,
        ),
        0..20,
    )
    .prop_map(|v| {
        v.into_iter()
            .map(|(q, qp, d, dp, s)| MatchRecord {
                query_id: q,
                query_pos: qp,
                doc_id: d,
                doc_pos: dp,
                similarity: s,
            })
            .collect()
    })
}

fn run_strategy() -> impl Strategy<Value = RunList> {
    prop::collection::btree_map(
        id_strategy(),
        prop::collection::btree_map(id_strategy(), -10_000_000i64..10_000_000, 1..8),
        0..5,
    )
    .prop_map(|queries| {
        let mut run = RunList::new("tag");
        for (q, docs) in queries {
            let scored = docs
                .into_iter()
                .map(|(d, s)| (d, s as f64 / 1e6))
                .collect::<Vec<_>>();
            let k = scored.len();
            run.insert(q, RunList::rank(scored, k));
        }
        run
    })
}

fn qrels_strategy() -> impl Strategy<Value = Qrels> {
    prop::collection::btree_map((id_strategy(), id_strategy()), 0u32..4, 0..20).prop_map(|m| {
        let mut q = Qrels::new();
        for ((a, b), g) in m {
            q.insert(&a, &b, g).unwrap();
        }
        q
    })
}

fn roundtrips() -> Result<(), String> {
    let mut runner = TestRunner::new(quiet(256));
    runner
        .run(&corpus_strategy(), |c| {
            let bytes = mvec::encode(&c).unwrap();
            let back = mvec::decode(&bytes).unwrap();
            prop_assert_eq!(&back, &c);
            prop_assert_eq!(mvec::encode(&back).unwrap(), bytes);
            Ok(())
        })
        .map_err(|e| format!("mvec: {e}"))?;
    runner
        .run(&attention_strategy(), |a| {
            let bytes = matt::encode(&a).unwrap();
            let back = matt::decode(&bytes).unwrap();
            prop_assert_eq!(&back, &a);
            prop_assert_eq!(matt::encode(&back).unwrap(), bytes);
            Ok(())
        })
        .map_err(|e| format!("matt: {e}"))?;
    runner
        .run(&weights_strategy(), |w| {
            let bytes = encode_resize_weights(&w).unwrap();
            let back = decode_resize_weights(&bytes).unwrap();
            prop_assert_eq!(&back, &w);
            prop_assert_eq!(encode_resize_weights(&back).unwrap(), bytes);
            Ok(())
        })
        .map_err(|e| format!("mrsz: {e}"))?;
    runner
        .run(&matches_strategy(), |m| {
            let text = matchlog::format_matches(&m);
            let back = matchlog::parse_matches(&text).unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(matchlog::format_matches(&back), text);
            Ok(())
        })
        .map_err(|e| format!("match log: {e}"))?;
    runner
        .run(&run_strategy(), |r| {
            let text = trec::format_run(&r);
            let back = trec::parse_run(&text).unwrap();
            prop_assert_eq!(trec::format_run(&back), text.clone());
            if !r.is_empty() {
                prop_assert_eq!(&back, &r);
            }
            Ok(())
        })
        .map_err(|e| format!("run: {e}"))?;
    runner
        .run(&qrels_strategy(), |q| {
            let text = trec::format_qrels(&q);
            let back = trec::parse_qrels(&text).unwrap();
            prop_assert_eq!(&back, &q);
            prop_assert_eq!(trec::format_qrels(&back), text);
            Ok(())
        })
        .map_err(|e| format!("qrels: {e}"))
}

fn located(e: &Error) -> bool {
    matches!(
        e,
        Error::Corruption { .. } | Error::Parse { .. } | Error::Format(_)
    )
}

type TextParser = fn(&str) -> Result<(), Error>;

fn malformed() -> Result<usize, String> {
    let mut checked = 0;
    let mut r = rng(99);
    let corpus = common::random_corpus(&mut r, 3, 4, 3);
    let bytes = mvec::encode(&corpus).unwrap();
    for cut in 0..bytes.len() {
        match mvec::decode(&bytes[..cut]) {
            Err(e) if located(&e) => checked += 1,
            other => return Err(format!("mvec truncated at {cut}: {other:?}")),
        }
    }
    let mut trailing = bytes.clone();
    trailing.push(0);
    match mvec::decode(&trailing) {
        Err(Error::Corruption { offset, .. }) if offset == bytes.len() as u64 => checked += 1,
        other => return Err(format!("mvec trailing byte: {other:?}")),
    }
    let mut nan = bytes.clone();
    let last = nan.len() - 4;
    nan[last..].copy_from_slice(&f32::NAN.to_le_bytes());
    match mvec::decode(&nan) {
        Err(Error::Validation(msg)) if msg.contains(&format!("byte {last}")) => checked += 1,
        other => return Err(format!("mvec NaN: {other:?}")),
    }

    let att = vec![uniform_attention(&mut r, "a", 2, 2, 3)];
    let abytes = matt::encode(&att).unwrap();
    for cut in 0..abytes.len() {
        match matt::decode(&abytes[..cut]) {
            Err(e) if located(&e) => checked += 1,
            other => return Err(format!("matt truncated at {cut}: {other:?}")),
        }
    }

    let texts: [(&str, TextParser, &str, usize); 5] = [
        (
            "run 5 fields",
            |t| trec::parse_run(t).map(drop),
            "q Q0 d 1 0.5 t\nq Q0 e 2 0.4",
            2,
        ),
        (
            "run bad rank",
            |t| trec::parse_run(t).map(drop),
            "q Q0 d 0 0.5 t",
            1,
        ),
        (
            "qrels 3 fields",
            |t| trec::parse_qrels(t).map(drop),
            "q 0 d 1\nq 0 e",
            2,
        ),
        (
            "qrels bad grade",
            |t| trec::parse_qrels(t).map(drop),
            "q 0 d x",
            1,
        ),
        (
            "match log",
            |t| matchlog::parse_matches(t).map(drop),
            "{\"qid\":\"q\",\"qpos\":0,\"did\":\"d\",\"dpos\":0,\"sim\":1.0}\n{\"qid\":1}",
            2,
        ),
    ];
    for (name, parse, text, want_line) in texts {
        match parse(text) {
            Err(Error::Parse { line, .. }) if line == want_line => checked += 1,
            other => return Err(format!("{name}: {other:?}")),
        }
    }
    Ok(checked)
}

#[test]
fn criterion_09_format_roundtrips() {
    let trips = roundtrips();
    let bad = malformed();
    let pass = trips.is_ok() && bad.is_ok();
    report(
        9,
        "format round trips",
        pass,
        format!(
            "round trips: {}; malformed inputs: {}",
            trips.as_ref().map_or_else(
                |e| e.clone(),
                |_| "mvec, matt, mrsz, jsonl, run, qrels ok".into()
            ),
            bad.as_ref()
                .map_or_else(|e| e.clone(), |n| format!("{n} rejected with locations")),
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 10. Determinism across worker counts

#[test]
fn criterion_10_thread_determinism() {
    let counts = [1usize, 2, 8];
    let ward: Vec<Vec<u8>> = counts
        .iter()
        .map(|&n| with_threads(n, || ward_run().0))
        .collect();
    let maxsim: Vec<Vec<u8>> = counts
        .iter()
        .map(|&n| with_threads(n, || maxsim_run().0))
        .collect();
    let synth: Vec<Vec<u8>> = counts
        .iter()
        .map(|&n| with_threads(n, || synth_run().bytes))
        .collect();
    let same = |v: &[Vec<u8>]| v.windows(2).all(|w| w[0] == w[1]);
    let (a, b, c) = (same(&ward), same(&maxsim), same(&synth));
    let pass = a && b && c;
    report(
        10,
        "thread determinism",
        pass,
        format!(
            "threads {counts:?}: ward identical {a}, maxsim identical {b}, synthetic identical {c}"
        ),
    );
    assert!(pass);
}
