//! End-to-end evaluation drivers: pairwise classification over two-way
//! tuples, and pool retrieval with optional prefilter and re-rank stages.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::metrics::{mrr, recall_at_k, roc_auc, RocReport};
use crate::corpus::{Arch, CorpusIndex, FuncId, GDatasetTuple, VDatasetTuple};
use crate::error::{Error, Result};
use crate::prefilter::{retained_ids, up_relation, FilterThresholds};
use crate::rerank::{cached_callee_sim, rerank, RerankOptions};
use crate::siamese::{score_pair, SiameseModel};
use crate::treelstm::encode_tree;

/// Classification report: how well the model separates homologous from
/// non-homologous pairs.
#[derive(Debug, Clone, Serialize)]
pub struct TaskCReport {
    /// Area under the ROC curve across every scored pair.
    pub overall_auc: f64,
    /// AUC per architecture pair (alphabetical key, e.g. `"arm-x86"`);
    /// buckets holding only one label are omitted.
    pub per_pair: BTreeMap<String, f64>,
    pub n_tuples: usize,
    /// Full curve behind `overall_auc`. Excluded from serialization: the
    /// sentinel thresholds are infinite, which JSON cannot carry — export
    /// the curve as CSV instead.
    #[serde(skip)]
    pub roc: RocReport,
}

fn pair_key(a: Arch, b: Arch) -> String {
    let (a, b) = (a.to_string(), b.to_string());
    if a <= b {
        format!("{a}-{b}")
    } else {
        format!("{b}-{a}")
    }
}

/// Encoder output cache. Invocation counts in reports are logical (one per
/// function per query) and are tallied by the callers; the cache only
/// avoids redundant arithmetic.
struct EncodeCache<'m> {
    model: &'m SiameseModel,
    hidden: HashMap<FuncId, Array1<f64>>,
}

impl<'m> EncodeCache<'m> {
    fn new(model: &'m SiameseModel) -> Self {
        EncodeCache {
            model,
            hidden: HashMap::new(),
        }
    }

    fn encode(&mut self, id: FuncId, index: &CorpusIndex) -> Result<&Array1<f64>> {
        if !self.hidden.contains_key(&id) {
            let h = encode_tree(&index.record(id).ast, &self.model.encoder)?;
            self.hidden.insert(id, h);
        }
        Ok(&self.hidden[&id])
    }

    fn sim(&mut self, a: FuncId, b: FuncId, index: &CorpusIndex) -> Result<f64> {
        self.encode(a, index)?;
        self.encode(b, index)?;
        Ok(score_pair(&self.hidden[&a], &self.hidden[&b], &self.model.w)?.sim)
    }
}

/// Scores every tuple's homolog and non-homolog against its source and
/// reports ROC AUC, overall and per architecture pair.
pub fn run_task_c(
    model: &SiameseModel,
    tuples: &[GDatasetTuple],
    index: &CorpusIndex,
) -> Result<TaskCReport> {
    if tuples.is_empty() {
        return Err(Error::Dataset("no classification tuples supplied".into()));
    }
    let mut cache = EncodeCache::new(model);
    let mut scored: Vec<(f64, bool)> = Vec::with_capacity(tuples.len() * 2);
    let mut buckets: BTreeMap<String, Vec<(f64, bool)>> = BTreeMap::new();
    for t in tuples {
        let src_arch = index.arch(t.source);
        for (pos, &cand) in t.pool.iter().enumerate() {
            let s = cache.sim(t.source, cand, index)?;
            let label = pos == t.homolog_pos;
            scored.push((s, label));
            buckets
                .entry(pair_key(src_arch, index.arch(cand)))
                .or_default()
                .push((s, label));
        }
    }
    let overall = roc_auc(&scored)?;
    let mut per_pair = BTreeMap::new();
    for (key, bucket) in buckets {
        let classes = bucket.iter().filter(|(_, l)| *l).count();
        if classes == 0 || classes == bucket.len() {
            continue; // one-label bucket has no curve
        }
        per_pair.insert(key, roc_auc(&bucket)?.auc);
    }
    Ok(TaskCReport {
        overall_auc: overall.auc,
        per_pair,
        n_tuples: tuples.len(),
        roc: overall,
    })
}

/// Retrieval pipeline configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskVConfig {
    /// Run the call-graph prefilter before encoding candidates.
    pub use_filter: bool,
    /// Re-rank the encoder's top candidates by callee structure.
    pub use_rerank: bool,
    pub thresholds: FilterThresholds,
    /// Weight of the model similarity in the re-ranked score.
    pub alpha: f64,
    /// Weight of the callee match score.
    pub beta: f64,
    /// How many encoder-ranked candidates the re-ranker inspects.
    pub top_k: usize,
    /// Cutoffs for recall@k.
    pub ks: Vec<usize>,
}

impl Default for TaskVConfig {
    fn default() -> Self {
        TaskVConfig {
            use_filter: true,
            use_rerank: true,
            thresholds: FilterThresholds::default(),
            alpha: 0.1,
            beta: 0.9,
            top_k: 20,
            ks: vec![1, 5, 10, 20],
        }
    }
}

impl TaskVConfig {
    pub fn validate(&self) -> Result<()> {
        self.thresholds.validate()?;
        self.rerank_options().validate()?;
        if self.top_k == 0 {
            return Err(Error::Param("top_k must be at least 1".into()));
        }
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(Error::Param(
                "recall cutoffs must be non-empty and positive".into(),
            ));
        }
        Ok(())
    }

    fn rerank_options(&self) -> RerankOptions {
        RerankOptions {
            alpha: self.alpha,
            beta: self.beta,
            normalize: false,
        }
    }
}

/// Per-query median wall time of each stage, in nanoseconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub filter_ns: u64,
    pub encode_ns: u64,
    pub rerank_ns: u64,
}

/// Retrieval report over a tuple set.
#[derive(Debug, Clone, Serialize)]
pub struct RankReport {
    pub mrr: f64,
    pub recall_at: BTreeMap<usize, f64>,
    /// MRR per source/homolog architecture pair (alphabetical key).
    pub per_pair: BTreeMap<String, f64>,
    /// Queries whose homolog survived the prefilter stage.
    pub homolog_retained: usize,
    /// Logical encoder runs: one per surviving candidate per query, plus
    /// the query itself.
    pub encoder_invocations: usize,
    /// Logical encoder runs spent scoring anonymous callees while
    /// re-ranking.
    pub rerank_encoder_invocations: usize,
    pub n_queries: usize,
    pub timing: StageTimings,
}

impl RankReport {
    /// Copy with zeroed timings; two runs over the same inputs serialize
    /// identically after this.
    pub fn without_timing(&self) -> RankReport {
        RankReport {
            timing: StageTimings::default(),
            ..self.clone()
        }
    }
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

/// Runs each tuple through filter → encode → rank → re-rank as configured
/// and reports rank statistics for the planted homolog. A homolog removed
/// by the filter, or rejected structurally by the re-ranker, scores as a
/// miss for its query.
pub fn run_task_v(
    config: &TaskVConfig,
    tuples: &[VDatasetTuple],
    model: &SiameseModel,
    index: &CorpusIndex,
) -> Result<RankReport> {
    config.validate()?;
    if tuples.is_empty() {
        return Err(Error::Dataset("no retrieval tuples supplied".into()));
    }

    let mut cache = EncodeCache::new(model);
    let options = config.rerank_options();
    let mut ranks: Vec<Option<usize>> = Vec::with_capacity(tuples.len());
    let mut buckets: BTreeMap<String, Vec<Option<usize>>> = BTreeMap::new();
    let mut homolog_retained = 0usize;
    let mut encoder_invocations = 0usize;
    let mut rerank_encoder_invocations = 0usize;
    let (mut filter_ns, mut encode_ns, mut rerank_ns) = (
        Vec::with_capacity(tuples.len()),
        Vec::with_capacity(tuples.len()),
        Vec::with_capacity(tuples.len()),
    );

    for t in tuples {
        let homolog = t.homolog();

        let start = Instant::now();
        let survivors: Vec<FuncId> = if config.use_filter {
            retained_ids(&up_relation(t.source, &t.pool, index, &config.thresholds)?)
        } else {
            t.pool.clone()
        };
        filter_ns.push(start.elapsed().as_nanos() as u64);
        if survivors.contains(&homolog) {
            homolog_retained += 1;
        }

        let start = Instant::now();
        encoder_invocations += survivors.len() + 1;
        let mut sims: Vec<(FuncId, f64)> = Vec::with_capacity(survivors.len());
        for &cand in &survivors {
            sims.push((cand, cache.sim(t.source, cand, index)?));
        }
        sims.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("similarities are finite")
                .then(a.0.cmp(&b.0))
        });
        encode_ns.push(start.elapsed().as_nanos() as u64);

        let start = Instant::now();
        let ranking: Vec<FuncId> = if config.use_rerank {
            let head = &sims[..config.top_k.min(sims.len())];
            let tail = sims.get(config.top_k..).unwrap_or(&[]);
            let mut callee_sim = cached_callee_sim(model, &mut rerank_encoder_invocations);
            let reranked = rerank(t.source, head, index, &mut callee_sim, &options)?;
            reranked
                .iter()
                .map(|e| e.candidate)
                .chain(tail.iter().map(|&(id, _)| id))
                .collect()
        } else {
            sims.iter().map(|&(id, _)| id).collect()
        };
        rerank_ns.push(start.elapsed().as_nanos() as u64);

        let rank = ranking.iter().position(|&id| id == homolog).map(|p| p + 1);
        ranks.push(rank);
        buckets
            .entry(pair_key(index.arch(t.source), index.arch(homolog)))
            .or_default()
            .push(rank);
    }

    let mut per_pair = BTreeMap::new();
    for (key, bucket) in buckets {
        per_pair.insert(key, mrr(&bucket)?);
    }
    let mut recall_at = BTreeMap::new();
    for &k in &config.ks {
        recall_at.insert(k, recall_at_k(&ranks, k)?);
    }
    Ok(RankReport {
        mrr: mrr(&ranks)?,
        recall_at,
        per_pair,
        homolog_retained,
        encoder_invocations,
        rerank_encoder_invocations,
        n_queries: tuples.len(),
        timing: StageTimings {
            filter_ns: median_ns(filter_ns),
            encode_ns: median_ns(encode_ns),
            rerank_ns: median_ns(rerank_ns),
        },
    })
}
