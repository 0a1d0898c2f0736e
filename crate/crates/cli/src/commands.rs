use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use mvpress_core::analysis::{self, StrengthNorm};
use mvpress_core::compress::agc::{AgcConfig, Aggregation, Clustering, Selection};
use mvpress_core::compress::parametric::{read_resize_weights, MemTokLayout};
use mvpress_core::eval;
use mvpress_core::format::{matt, mvec};
use mvpress_core::meta::meta_path_for;
use mvpress_core::synth::{self, SynthSpec};
use mvpress_core::{
    build_index, check_attention, compress_corpus, matchlog, trec, Budget, Capture,
    CompressOptions, CompressionMeta, Compressor, FlatIndex,
};

use crate::{
    AnalyzeArgs, CompressArgs, EvalArgs, GenSynthArgs, IndexArgs, MethodArg, NormArg, SearchArgs,
    SelectArg, Switch, UsageError, WeightArg,
};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

fn ctx(path: &Path) -> String {
    format!("reading {}", path.display())
}

pub fn gen_synth(a: GenSynthArgs) -> Result<()> {
    let spec = SynthSpec {
        doc_count: a.docs as usize,
        concepts: a.concepts as usize,
        redundancy: a.redundancy as usize,
        sigma: a.sigma,
        dim: a.dim as usize,
        seed: a.seed,
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let data = synth::generate(&spec)?;
    synth::write_synth(&data, &a.out_dir)?;
    eprintln!(
        "wrote {} docs x {} tokens (dim {}) to {}",
        spec.doc_count,
        spec.tokens_per_doc(),
        spec.dim,
        a.out_dir.display()
    );
    Ok(())
}

pub fn compress(a: CompressArgs) -> Result<()> {
    let m = a.budget as usize;
    if a.protected > 0 && a.method != MethodArg::HPool {
        return Err(usage("--protected only applies to --method h-pool"));
    }
    let corpus = mvec::read_mvec(&a.input).with_context(|| ctx(&a.input))?;
    let options = CompressOptions {
        pad_short: a.pad_short.is_some(),
    };

    let weights;
    let attention;
    let compressor = match a.method {
        MethodArg::SeqResize => {
            let path = a
                .weights
                .as_deref()
                .ok_or_else(|| usage("seq-resize needs --weights"))?;
            weights = read_resize_weights(path).with_context(|| ctx(path))?;
            if weights.m() != m {
                bail!(
                    "weights in {} produce {} vectors but --budget is {m}",
                    path.display(),
                    weights.m()
                );
            }
            Compressor::SeqResize(&weights)
        }
        MethodArg::MemTok => Compressor::MemTok(MemTokLayout::suffix(m)?),
        MethodArg::HPool => Compressor::HPool(
            Budget::new(m, a.protected as usize).map_err(|e| usage(e.to_string()))?,
        ),
        MethodArg::Agc => {
            let path = a.attn.as_deref().ok_or_else(|| usage("agc needs --attn"))?;
            attention = matt::read_attention(path).with_context(|| ctx(path))?;
            check_attention(&attention, &corpus)?;
            let config = AgcConfig {
                m,
                selection: match a.agc_select {
                    SelectArg::Attention => Selection::Attention,
                    SelectArg::Random => Selection::Random { seed: a.seed },
                },
                aggregation: match a.agc_weight {
                    WeightArg::Weighted => Aggregation::Weighted,
                    WeightArg::Unweighted => Aggregation::Unweighted,
                },
                clustering: match a.agc_cluster {
                    Switch::On => Clustering::On,
                    Switch::Off => Clustering::Off,
                },
            };
            Compressor::Agc {
                config,
                attention: &attention,
            }
        }
    };

    let (out, meta) = compress_corpus(&corpus, &compressor, options)?;
    mvec::write_mvec(&out, &a.out)?;
    meta.write(&meta_path_for(&a.out))?;
    eprintln!(
        "compressed {} docs with {} to {m} vectors each (ratio {})",
        out.len(),
        meta.method.as_str(),
        meta.ratio.map_or("n/a".to_string(), |r| format!("{r:.4}"))
    );
    Ok(())
}

fn load_meta(corpus_path: &Path) -> Result<Option<CompressionMeta>> {
    let path = meta_path_for(corpus_path);
    if path.exists() {
        Ok(Some(
            CompressionMeta::read(&path).with_context(|| ctx(&path))?,
        ))
    } else {
        Ok(None)
    }
}

pub fn index(a: IndexArgs) -> Result<()> {
    let mut corpus = mvec::read_mvec(&a.input).with_context(|| ctx(&a.input))?;
    if a.normalize {
        corpus = corpus.normalized();
    }
    let idx = build_index(corpus, load_meta(&a.input)?)?;
    idx.save(&a.out)?;
    eprintln!(
        "indexed {} docs, {} vectors",
        idx.len(),
        idx.total_vectors()
    );
    Ok(())
}

pub fn search(a: SearchArgs) -> Result<()> {
    let mut idx = FlatIndex::load(&a.index).with_context(|| ctx(&a.index))?;
    let mut queries = mvec::read_mvec(&a.queries).with_context(|| ctx(&a.queries))?;
    if a.normalize {
        idx = build_index(idx.corpus().normalized(), idx.meta().cloned())?;
        queries = queries.normalized();
    }
    let qrels = match &a.qrels {
        Some(p) => Some(trec::read_qrels(p).with_context(|| ctx(p))?),
        None => None,
    };
    let capture = match (&a.matches, &qrels) {
        (None, _) => Capture::None,
        (Some(_), None) => Capture::Returned,
        (Some(_), Some(q)) => Capture::ReturnedAndRelevant(q),
    };
    let (run, matches) = idx.search_many(&queries, a.k as usize, capture, &a.tag)?;
    trec::write_run(&run, &a.out)?;
    if let Some(path) = &a.matches {
        matchlog::write_matches(&matches, path)?;
    }
    eprintln!("searched {} queries over {} docs", run.len(), idx.len());
    Ok(())
}

fn metric_table(
    run: &trec::RunList,
    qrels: &trec::Qrels,
    ks: &[u32],
) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for &k in ks {
        out.insert(format!("R@{k}"), eval::recall_at_k(run, qrels, k as usize)?);
        out.insert(
            format!("nDCG@{k}"),
            eval::ndcg_at_k(run, qrels, k as usize)?,
        );
    }
    out.insert("MRR".to_string(), eval::mrr(run, qrels));
    Ok(out)
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (x * s).round() / s
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let run = trec::read_run(&a.run).with_context(|| ctx(&a.run))?;
    let qrels = trec::read_qrels(&a.qrels).with_context(|| ctx(&a.qrels))?;
    let metrics = metric_table(&run, &qrels, &a.ks)?;
    let mut report = json!({ "queries": run.len(), "metrics": metrics });
    if let Some(path) = &a.baseline {
        let base_run = trec::read_run(path).with_context(|| ctx(path))?;
        let base = metric_table(&base_run, &qrels, &a.ks)?;
        let percents: BTreeMap<&String, Value> = metrics
            .iter()
            .map(|(name, &v)| {
                let p = eval::percent_of_baseline(v, base[name])
                    .ok()
                    .map(|p| json!(round_to(p, 1)))
                    .unwrap_or(Value::Null);
                (name, p)
            })
            .collect();
        report["baseline"] = json!(base);
        report["percent_of_baseline"] = json!(percents);
    }
    let text = serde_json::to_string_pretty(&report)?;
    println!("{text}");
    if let Some(out) = &a.out {
        fs::write(out, text + "\n")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CorrelationRow {
    metric: String,
    evenness: String,
    r: f64,
    p_value: f64,
    n: usize,
}

/// Pearson r between each retrieval column and 1/cv, 1/gini.
fn correlate(path: &Path) -> Result<Vec<CorrelationRow>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| ctx(path))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (cv_col, gini_col) = match (col("cv"), col("gini")) {
        (Some(c), Some(g)) => (c, g),
        _ => bail!("{} needs `cv` and `gini` columns", path.display()),
    };
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        for (c, field) in row.iter().enumerate().skip(1) {
            let v: f64 = field.trim().parse().map_err(|_| {
                anyhow!(
                    "{} line {}: {field:?} is not a number",
                    path.display(),
                    i + 2
                )
            })?;
            columns[c].push(v);
        }
    }
    let inverse = |c: usize| -> Vec<f64> { columns[c].iter().map(|v| 1.0 / v).collect() };
    let mut out = Vec::new();
    for (c, name) in headers.iter().enumerate().skip(1) {
        if c == cv_col || c == gini_col {
            continue;
        }
        for (label, ec) in [("cv", cv_col), ("gini", gini_col)] {
            let t = analysis::pearson_test(&columns[c], &inverse(ec))?;
            out.push(CorrelationRow {
                metric: name.to_string(),
                evenness: label.to_string(),
                r: t.r,
                p_value: t.p_value,
                n: t.n,
            });
        }
    }
    Ok(out)
}

pub fn analyze(a: AnalyzeArgs) -> Result<()> {
    let idx = FlatIndex::load(&a.index).with_context(|| ctx(&a.index))?;
    let mut matches = matchlog::read_matches(&a.matches).with_context(|| ctx(&a.matches))?;
    if let Some(p) = &a.qrels {
        let qrels = trec::read_qrels(p).with_context(|| ctx(p))?;
        matches.retain(|r| qrels.is_relevant(&r.query_id, &r.doc_id));
    }
    let norm = match a.strength_norm {
        NormArg::Global => StrengthNorm::Global,
        NormArg::PerQueryPosition => StrengthNorm::PerQueryPosition,
    };
    let doc_len = match idx.meta() {
        Some(meta) => meta.budget.m,
        None => idx
            .corpus()
            .docs()
            .iter()
            .map(|d| d.embeddings.rows())
            .max()
            .unwrap_or(0),
    };
    fs::create_dir_all(&a.out_dir)?;

    let strength = analysis::matching_strength(&matches, doc_len, norm)?;
    let mut w = csv::Writer::from_path(a.out_dir.join("strength.csv"))?;
    w.write_record(["position", "strength"])?;
    for (j, s) in strength.iter().enumerate() {
        w.write_record([j.to_string(), s.to_string()])?;
    }
    w.flush()?;

    match analysis::mean_pairwise_cosine(&idx) {
        Ok(cos) => {
            let mut w = csv::Writer::from_path(a.out_dir.join("cosine.csv"))?;
            w.write_record(["a", "b", "cosine"])?;
            for x in 0..cos.n() {
                for y in 0..cos.n() {
                    w.write_record([x.to_string(), y.to_string(), cos.get(x, y).to_string()])?;
                }
            }
            w.flush()?;
        }
        Err(e) => eprintln!("skipping cosine heatmap: {e}"),
    }

    let evenness = analysis::evenness(&strength).ok();
    let mut summary = json!({
        "records": matches.len(),
        "doc_len": doc_len,
        "strength_norm": norm,
        "utilization": analysis::utilization_fraction(&matches, &idx),
        "cv": evenness.map(|e| e.cv),
        "gini": evenness.map(|e| e.gini),
        "sample_count": strength.len(),
    });
    if let Some(path) = &a.correlate {
        summary["pearson"] = json!(correlate(path)?);
    }
    let text = serde_json::to_string_pretty(&summary)?;
    fs::write(a.out_dir.join("summary.json"), text.clone() + "\n")?;
    println!("{text}");
    Ok(())
}
