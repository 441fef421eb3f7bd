use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Args;
use homolog_core::corpus::{load_corpus_file, Corpus, CorpusIndex, FuncId};
use homolog_core::prefilter::{up_relation, FilterBranch, FilterThresholds, FilterVerdict};
use homolog_core::rerank::{cached_callee_sim, rerank, RerankOptions};
use homolog_core::siamese::{load_model, score_pair, SiameseModel};
use homolog_core::treelstm::encode_tree;
use homolog_core::Error;
use serde::{Deserialize, Serialize};

use crate::common::{file_sha256, load_config, report_path, timings_path, write_json};

/// Search parameters; file values (TOML/JSON) are overridden by flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SearchFileConfig {
    t_gl: f64,
    t_callee: f64,
    t_string: f64,
    max_caller_depth: usize,
    alpha: f64,
    beta: f64,
    top_k: usize,
    /// Candidates whose model similarity falls below this are discarded
    /// before re-ranking.
    cutoff: f64,
    seed: u64,
}

impl Default for SearchFileConfig {
    fn default() -> Self {
        SearchFileConfig {
            t_gl: 0.1,
            t_callee: 0.8,
            t_string: 0.8,
            max_caller_depth: 2,
            alpha: 0.1,
            beta: 0.9,
            top_k: 20,
            cutoff: 0.89,
            seed: 0,
        }
    }
}

#[derive(Args)]
pub struct SearchArgs {
    /// Target corpus to search (JSONL)
    #[arg(long)]
    corpus: PathBuf,
    /// Model checkpoint (JSON)
    #[arg(long)]
    model: PathBuf,
    /// Query functions, in corpus format; binary ids must not collide with
    /// the target corpus
    #[arg(long)]
    queries: PathBuf,
    /// Function id or name within the queries file; repeatable. Defaults to
    /// every named query function
    #[arg(long = "query-id")]
    query_ids: Vec<String>,
    /// Config file (TOML/JSON) with thresholds/alpha/beta/top_k/cutoff/seed
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    t_gl: Option<f64>,
    #[arg(long)]
    t_callee: Option<f64>,
    #[arg(long)]
    t_string: Option<f64>,
    #[arg(long)]
    max_caller_depth: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    cutoff: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Ranked results (JSONL); defaults to search_results.jsonl in the
    /// report dir. Timing medians go to a _timings.json sidecar
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct MetaLine<'a> {
    r#type: &'static str,
    corpus: String,
    queries: String,
    checkpoint_sha256: &'a str,
    config: &'a SearchFileConfig,
}

#[derive(Serialize)]
struct QueryLine<'a> {
    r#type: &'static str,
    binary_id: &'a str,
    function_id: &'a str,
    name: &'a str,
    candidates: usize,
    retained: usize,
    results: usize,
}

#[derive(Serialize)]
struct MatchDetail {
    named: usize,
    anon_scores: Vec<f64>,
    total: f64,
}

#[derive(Serialize)]
struct ResultLine<'a> {
    r#type: &'static str,
    query_binary: &'a str,
    query_function: &'a str,
    rank: usize,
    binary_id: &'a str,
    function_id: &'a str,
    name: &'a str,
    arch: &'a str,
    filter_branch: FilterBranch,
    filter_scores: &'a BTreeMap<String, f64>,
    filter_missing: bool,
    model_sim: f64,
    #[serde(rename = "match")]
    match_detail: Option<MatchDetail>,
    final_score: f64,
}

#[derive(Serialize)]
struct SearchTimings {
    queries: usize,
    filter_ns: u64,
    encode_ns: u64,
    rerank_ns: u64,
}

fn median_ns(mut samples: Vec<u64>) -> u64 {
    if samples.is_empty() {
        return 0;
    }
    samples.sort_unstable();
    let mid = samples.len() / 2;
    if samples.len() % 2 == 1 {
        samples[mid]
    } else {
        (samples[mid - 1] + samples[mid]) / 2
    }
}

/// Encoder cache, valid for exactly one checkpoint — the hash recorded in
/// the meta line identifies it.
struct Encodings<'m> {
    model: &'m SiameseModel,
    hidden: HashMap<FuncId, ndarray::Array1<f64>>,
}

impl<'m> Encodings<'m> {
    fn sim(&mut self, a: FuncId, b: FuncId, index: &CorpusIndex) -> Result<f64> {
        for id in [a, b] {
            if !self.hidden.contains_key(&id) {
                let h = encode_tree(&index.record(id).ast, &self.model.encoder)?;
                self.hidden.insert(id, h);
            }
        }
        Ok(score_pair(&self.hidden[&a], &self.hidden[&b], &self.model.w)?.sim)
    }
}

pub fn run(args: SearchArgs) -> Result<()> {
    let mut config: SearchFileConfig = match &args.config {
        Some(path) => load_config(path)?,
        None => SearchFileConfig::default(),
    };
    if let Some(v) = args.t_gl {
        config.t_gl = v;
    }
    if let Some(v) = args.t_callee {
        config.t_callee = v;
    }
    if let Some(v) = args.t_string {
        config.t_string = v;
    }
    if let Some(v) = args.max_caller_depth {
        config.max_caller_depth = v;
    }
    if let Some(v) = args.alpha {
        config.alpha = v;
    }
    if let Some(v) = args.beta {
        config.beta = v;
    }
    if let Some(v) = args.top_k {
        config.top_k = v;
    }
    if let Some(v) = args.cutoff {
        config.cutoff = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if !(0.0..=1.0).contains(&config.cutoff) {
        return Err(Error::Param(format!("cutoff must lie in [0,1], got {}", config.cutoff)).into());
    }
    if config.top_k == 0 {
        return Err(Error::Param("top_k must be at least 1".into()).into());
    }
    let thresholds = FilterThresholds {
        t_gl: config.t_gl,
        t_callee: config.t_callee,
        t_string: config.t_string,
        max_caller_depth: config.max_caller_depth,
    };
    thresholds.validate()?;
    let options = RerankOptions {
        alpha: config.alpha,
        beta: config.beta,
        normalize: false,
    };
    options.validate()?;

    let target = load_corpus_file(&args.corpus)
        .with_context(|| format!("loading {}", args.corpus.display()))?;
    let query_corpus = load_corpus_file(&args.queries)
        .with_context(|| format!("loading {}", args.queries.display()))?;
    let target_ids: BTreeSet<String> = target
        .binaries()
        .iter()
        .map(|b| b.binary_id.clone())
        .collect();
    let merged = Corpus::from_binaries(
        target
            .binaries()
            .iter()
            .chain(query_corpus.binaries())
            .cloned()
            .collect(),
    )
    .context("query binary ids must not collide with the target corpus")?;
    let index = CorpusIndex::build(&merged);

    let in_target = |id: FuncId| target_ids.contains(&index.record(id).binary_id);
    let candidates: Vec<FuncId> = index.ids().filter(|&id| in_target(id)).collect();
    let query_pool: Vec<FuncId> = index.ids().filter(|&id| !in_target(id)).collect();

    // resolve requested ids against the query file, by id then by name
    let queries: Vec<FuncId> = if args.query_ids.is_empty() {
        query_pool
            .iter()
            .copied()
            .filter(|&id| index.record(id).is_named())
            .collect()
    } else {
        let mut picked = Vec::new();
        for wanted in &args.query_ids {
            let mut hits: Vec<FuncId> = query_pool
                .iter()
                .copied()
                .filter(|&id| index.record(id).id == *wanted)
                .collect();
            if hits.is_empty() {
                hits = query_pool
                    .iter()
                    .copied()
                    .filter(|&id| index.record(id).name == *wanted)
                    .collect();
            }
            if hits.is_empty() {
                return Err(Error::QueryNotFound(wanted.clone()).into());
            }
            picked.extend(hits);
        }
        picked.sort();
        picked.dedup();
        picked
    };

    let model = load_model(&args.model)
        .with_context(|| format!("loading checkpoint {}", args.model.display()))?;
    let checkpoint_sha256 = file_sha256(&args.model)?;

    let out_path = report_path(args.out, "search_results.jsonl");
    if let Some(parent) = out_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut out = BufWriter::new(
        File::create(&out_path).with_context(|| format!("creating {}", out_path.display()))?,
    );
    let meta = MetaLine {
        r#type: "meta",
        corpus: args.corpus.display().to_string(),
        queries: args.queries.display().to_string(),
        checkpoint_sha256: &checkpoint_sha256,
        config: &config,
    };
    serde_json::to_writer(&mut out, &meta)?;
    out.write_all(b"\n")?;

    let mut encodings = Encodings {
        model: &model,
        hidden: HashMap::new(),
    };
    let (mut filter_ns, mut encode_ns, mut rerank_ns) = (Vec::new(), Vec::new(), Vec::new());
    let mut total_results = 0usize;
    let mut rerank_encodings = 0usize;

    for &query in &queries {
        let started = Instant::now();
        let verdicts = up_relation(query, &candidates, &index, &thresholds)?;
        let by_candidate: HashMap<FuncId, &FilterVerdict> =
            verdicts.iter().map(|v| (v.candidate, v)).collect();
        let survivors: Vec<FuncId> = verdicts
            .iter()
            .filter(|v| v.retained)
            .map(|v| v.candidate)
            .collect();
        filter_ns.push(started.elapsed().as_nanos() as u64);

        let started = Instant::now();
        let mut sims: Vec<(FuncId, f64)> = Vec::with_capacity(survivors.len());
        for &cand in &survivors {
            sims.push((cand, encodings.sim(query, cand, &index)?));
        }
        sims.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("similarities are finite")
                .then(a.0.cmp(&b.0))
        });
        sims.truncate(config.top_k);
        sims.retain(|&(_, s)| s >= config.cutoff);
        encode_ns.push(started.elapsed().as_nanos() as u64);

        let started = Instant::now();
        let mut callee_sim = cached_callee_sim(&model, &mut rerank_encodings);
        let ranked = rerank(query, &sims, &index, &mut callee_sim, &options)?;
        drop(callee_sim);
        rerank_ns.push(started.elapsed().as_nanos() as u64);

        let q = index.record(query);
        let header = QueryLine {
            r#type: "query",
            binary_id: &q.binary_id,
            function_id: &q.id,
            name: &q.name,
            candidates: candidates.len(),
            retained: survivors.len(),
            results: ranked.len(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;

        for (pos, entry) in ranked.iter().enumerate() {
            let rec = index.record(entry.candidate);
            let verdict = by_candidate[&entry.candidate];
            let line = ResultLine {
                r#type: "result",
                query_binary: &q.binary_id,
                query_function: &q.id,
                rank: pos + 1,
                binary_id: &rec.binary_id,
                function_id: &rec.id,
                name: &rec.name,
                arch: rec.arch.as_str(),
                filter_branch: verdict.branch,
                filter_scores: &verdict.scores,
                filter_missing: verdict.missing,
                model_sim: entry.model_sim,
                match_detail: entry.detail.as_ref().map(|m| MatchDetail {
                    named: m.named,
                    anon_scores: m.anon_scores.clone(),
                    total: m.total,
                }),
                final_score: entry.final_score,
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        total_results += ranked.len();
    }
    out.flush()?;

    let sidecar = timings_path(&out_path);
    write_json(
        &SearchTimings {
            queries: queries.len(),
            filter_ns: median_ns(filter_ns),
            encode_ns: median_ns(encode_ns),
            rerank_ns: median_ns(rerank_ns),
        },
        &sidecar,
    )?;

    println!(
        "searched {} quer{} against {} candidates, {} results (checkpoint sha256 {})",
        queries.len(),
        if queries.len() == 1 { "y" } else { "ies" },
        candidates.len(),
        total_results,
        checkpoint_sha256,
    );
    println!("results {}", out_path.display());
    println!("timings {}", sidecar.display());
    Ok(())
}
