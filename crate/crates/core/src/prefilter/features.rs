//! Benchmark harness for candidate filter features. Each feature is either
//! a scalar (compared by relative-difference ratio) or a sequence (sorted,
//! then compared by common-sequence ratio). For every sampled source
//! function a fixed-size pool per architecture is drawn that always contains
//! the source's true homolog, and every feature is swept over a threshold
//! grid to measure retention of homologs against retention of noise.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{csr, f_score, rdr};
use crate::corpus::{CorpusIndex, FuncId, FunctionRecord};
use crate::error::{Error, Result};
use crate::eval::roc_auc;

#[derive(Debug, Clone, PartialEq)]
pub enum Feature {
    Value(f64),
    /// Element identities, already sorted; strings and constants are hashed.
    Sequence(Vec<u64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Value,
    Sequence,
}

pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    extract: Box<dyn Fn(&FunctionRecord) -> Feature>,
}

impl FeatureSpec {
    pub fn value(name: &str, f: impl Fn(&FunctionRecord) -> f64 + 'static) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::Value,
            extract: Box::new(move |r| Feature::Value(f(r))),
        }
    }

    pub fn sequence(name: &str, f: impl Fn(&FunctionRecord) -> Vec<u64> + 'static) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::Sequence,
            extract: Box::new(move |r| {
                let mut seq = f(r);
                seq.sort_unstable();
                Feature::Sequence(seq)
            }),
        }
    }

    pub fn extract(&self, record: &FunctionRecord) -> Feature {
        (self.extract)(record)
    }
}

impl std::fmt::Debug for FeatureSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FeatureSpec")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .finish()
    }
}

/// Similarity of two extracted features in [0, 1].
pub fn compare_features(a: &Feature, b: &Feature) -> Result<f64> {
    match (a, b) {
        (Feature::Value(x), Feature::Value(y)) => rdr(*x, *y),
        (Feature::Sequence(x), Feature::Sequence(y)) => Ok(csr(x, y)),
        _ => Err(Error::Param("cannot compare a scalar feature with a sequence".into())),
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// The candidate feature set: five instruction counts, two size measures,
/// and four content sequences.
pub fn default_feature_specs() -> Vec<FeatureSpec> {
    vec![
        FeatureSpec::value("instructions", |r| r.instr_stats.instructions as f64),
        FeatureSpec::value("arithmetic_instructions", |r| r.instr_stats.arithmetic as f64),
        FeatureSpec::value("call_instructions", |r| r.instr_stats.call as f64),
        FeatureSpec::value("logical_instructions", |r| r.instr_stats.logical as f64),
        FeatureSpec::value("transfer_instructions", |r| r.instr_stats.transfer as f64),
        FeatureSpec::value("callee_count", |r| r.callees.len() as f64),
        FeatureSpec::value("ast_node_count", |r| r.ast.node_count() as f64),
        FeatureSpec::sequence("ast_label_cluster", |r| {
            r.ast
                .label_cluster()
                .into_iter()
                .map(|(id, count)| (id as u64) << 32 | count as u64)
                .collect()
        }),
        FeatureSpec::sequence("ast_labels", |r| {
            r.ast.preorder_labels().into_iter().map(|l| l.id() as u64).collect()
        }),
        FeatureSpec::sequence("string_constants", |r| {
            r.string_constants.iter().map(|s| fnv1a64(s.as_bytes())).collect()
        }),
        FeatureSpec::sequence("numeric_constants", |r| {
            r.numeric_constants.iter().map(|&n| n as u64).collect()
        }),
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct FeatureBenchConfig {
    /// How many source functions to sample (each must have a homolog on
    /// every architecture in the corpus).
    pub n_sources: usize,
    /// Pool size per architecture, homolog included.
    pub pool_size: usize,
    /// Retention thresholds to sweep.
    pub thresholds: Vec<f64>,
    pub seed: u64,
}

impl Default for FeatureBenchConfig {
    fn default() -> Self {
        FeatureBenchConfig {
            n_sources: 10,
            pool_size: 20,
            thresholds: (0..=50).map(|i| i as f64 / 50.0).collect(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FeatureBenchRow {
    pub feature: String,
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub f_score: f64,
    /// Mean extraction+comparison cost per pair. Wall-clock: excluded from
    /// reproducibility guarantees.
    pub mean_ns: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeatureBenchSummary {
    pub feature: String,
    pub kind: FeatureKind,
    pub best_threshold: f64,
    pub best_f_score: f64,
    pub auc: f64,
    pub mean_ns: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeatureBenchReport {
    pub n_sources: usize,
    pub pool_size: usize,
    pub positive_pairs: usize,
    pub negative_pairs: usize,
    pub rows: Vec<FeatureBenchRow>,
    pub summary: Vec<FeatureBenchSummary>,
}

pub fn feature_bench(
    index: &CorpusIndex<'_>,
    specs: &[FeatureSpec],
    config: &FeatureBenchConfig,
) -> Result<FeatureBenchReport> {
    if config.n_sources == 0 || config.pool_size == 0 {
        return Err(Error::Param("n_sources and pool_size must be >= 1".into()));
    }
    if config.thresholds.is_empty() {
        return Err(Error::Param("threshold sweep must be non-empty".into()));
    }
    for &t in &config.thresholds {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Param(format!("sweep threshold {t} outside [0,1]")));
        }
    }
    if specs.is_empty() {
        return Err(Error::Param("no feature specs given".into()));
    }

    let archs = index.archs().to_vec();
    if archs.len() < 2 {
        return Err(Error::Dataset("feature benchmark needs at least two architectures".into()));
    }

    // Sources must cover every architecture so each contributes exactly
    // (archs - 1) homologous pairs.
    let eligible: Vec<FuncId> = index
        .ids()
        .filter(|&id| {
            let mut covered: Vec<_> = index.homologs(id).iter().map(|&h| index.arch(h)).collect();
            covered.push(index.arch(id));
            covered.sort_unstable();
            covered.dedup();
            covered == archs
        })
        .collect();
    if eligible.len() < config.n_sources {
        return Err(Error::Dataset(format!(
            "requested {} benchmark sources, only {} functions have homologs on every architecture",
            config.n_sources,
            eligible.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sources: Vec<FuncId> = rand::seq::index::sample(&mut rng, eligible.len(), config.n_sources)
        .iter()
        .map(|i| eligible[i])
        .collect();

    // (source, candidate, is_positive); the source itself never pairs.
    let mut pairs: Vec<(FuncId, FuncId, bool)> = Vec::new();
    for &src in &sources {
        let group: Vec<FuncId> = {
            let mut g = index.homologs(src);
            g.push(src);
            g.sort_unstable();
            g
        };
        for &arch in &archs {
            let member = *group
                .iter()
                .find(|&&m| index.arch(m) == arch)
                .expect("eligibility guarantees one member per arch");
            let negatives: Vec<FuncId> = index
                .ids()
                .filter(|&id| index.arch(id) == arch && group.binary_search(&id).is_err())
                .collect();
            if negatives.len() < config.pool_size - 1 {
                return Err(Error::Dataset(format!(
                    "pool of {} needs {} non-homologs on {}, only {} available",
                    config.pool_size,
                    config.pool_size - 1,
                    arch,
                    negatives.len()
                )));
            }
            let sampled = rand::seq::index::sample(&mut rng, negatives.len(), config.pool_size - 1);
            if member != src {
                pairs.push((src, member, true));
            }
            for i in sampled.iter() {
                pairs.push((src, negatives[i], false));
            }
        }
    }
    let positive_pairs = pairs.iter().filter(|(_, _, y)| *y).count();
    let negative_pairs = pairs.len() - positive_pairs;
    debug_assert_eq!(positive_pairs, sources.len() * (archs.len() - 1));
    debug_assert_eq!(
        negative_pairs,
        sources.len() * archs.len() * (config.pool_size - 1)
    );

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for spec in specs {
        let started = Instant::now();
        let scored: Vec<(f64, bool)> = pairs
            .iter()
            .map(|&(a, b, y)| {
                let fa = spec.extract(index.record(a));
                let fb = spec.extract(index.record(b));
                compare_features(&fa, &fb).map(|s| (s, y))
            })
            .collect::<Result<_>>()?;
        let mean_ns = started.elapsed().as_nanos() as f64 / pairs.len() as f64;

        let mut best: Option<(f64, f64)> = None; // (threshold, f_score)
        for &t in &config.thresholds {
            let tp = scored.iter().filter(|(s, y)| *y && *s >= t).count();
            let fp = scored.iter().filter(|(s, y)| !*y && *s >= t).count();
            let tpr = tp as f64 / positive_pairs as f64;
            let fpr = fp as f64 / negative_pairs as f64;
            let fs = f_score(tpr, fpr)?;
            if best.map_or(true, |(_, b)| fs > b) {
                best = Some((t, fs));
            }
            rows.push(FeatureBenchRow {
                feature: spec.name.clone(),
                threshold: t,
                tpr,
                fpr,
                f_score: fs,
                mean_ns,
            });
        }
        let (best_threshold, best_f_score) = best.expect("sweep is non-empty");
        summary.push(FeatureBenchSummary {
            feature: spec.name.clone(),
            kind: spec.kind,
            best_threshold,
            best_f_score,
            auc: roc_auc(&scored)?.auc,
            mean_ns,
        });
    }

    Ok(FeatureBenchReport {
        n_sources: sources.len(),
        pool_size: config.pool_size,
        positive_pairs,
        negative_pairs,
        rows,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synth_corpus, GeneratorSpec};

    fn bench_corpus(perturbed: bool) -> crate::corpus::Corpus {
        let spec = GeneratorSpec {
            libraries: 3,
            functions_per_library: 6,
            label_substitution_rate: if perturbed { 0.1 } else { 0.0 },
            subtree_edit_rate: if perturbed { 0.05 } else { 0.0 },
            callee_edit_rate: if perturbed { 0.15 } else { 0.0 },
            constant_retention: if perturbed { 0.95 } else { 1.0 },
            strip_fraction: 0.0,
            ..GeneratorSpec::default()
        };
        synth_corpus(&spec, 42).unwrap().0
    }

    #[test]
    fn default_specs_are_distinct() {
        let specs = default_feature_specs();
        assert_eq!(specs.len(), 11);
        let mut names: Vec<&str> = specs.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), 11);
    }

    #[test]
    fn identical_records_score_one_on_every_feature() {
        let corpus = bench_corpus(false);
        let (_, record) = corpus.functions().next().unwrap();
        for spec in default_feature_specs() {
            let f = spec.extract(record);
            assert_eq!(compare_features(&f, &f).unwrap(), 1.0, "{}", spec.name);
        }
    }

    #[test]
    fn mismatched_kinds_are_rejected() {
        let a = Feature::Value(1.0);
        let b = Feature::Sequence(vec![1]);
        assert!(compare_features(&a, &b).is_err());
    }

    #[test]
    fn bench_shape_and_bounds() {
        let corpus = bench_corpus(true);
        let index = CorpusIndex::build(&corpus);
        let config = FeatureBenchConfig {
            n_sources: 5,
            pool_size: 4,
            thresholds: vec![0.0, 0.5, 1.0],
            seed: 3,
        };
        let specs = default_feature_specs();
        let report = feature_bench(&index, &specs, &config).unwrap();
        assert_eq!(report.rows.len(), specs.len() * 3);
        assert_eq!(report.summary.len(), specs.len());
        assert_eq!(report.positive_pairs, 5 * 3);
        assert_eq!(report.negative_pairs, 5 * 4 * 3);
        for row in &report.rows {
            assert!((0.0..=1.0).contains(&row.tpr), "{row:?}");
            assert!((0.0..=1.0).contains(&row.fpr), "{row:?}");
            assert!((0.0..=1.0).contains(&row.f_score), "{row:?}");
            if row.threshold == 0.0 {
                // every score is >= 0, so nothing is dropped
                assert_eq!((row.tpr, row.fpr), (1.0, 1.0));
            }
        }
        for s in &report.summary {
            assert!((0.0..=1.0 + 1e-12).contains(&s.auc), "{s:?}");
        }
    }

    #[test]
    fn unperturbed_homologs_always_pass_value_features() {
        let corpus = bench_corpus(false);
        let index = CorpusIndex::build(&corpus);
        let config = FeatureBenchConfig {
            n_sources: 6,
            pool_size: 5,
            thresholds: vec![1.0],
            seed: 9,
        };
        let specs = vec![FeatureSpec::value("ast_node_count", |r| {
            r.ast.node_count() as f64
        })];
        let report = feature_bench(&index, &specs, &config).unwrap();
        // identical ASTs: every homolog matches exactly even at threshold 1
        assert_eq!(report.rows[0].tpr, 1.0);
        assert!(report.summary[0].auc >= 0.5);
    }

    #[test]
    fn deterministic_up_to_timing() {
        let corpus = bench_corpus(true);
        let index = CorpusIndex::build(&corpus);
        let config = FeatureBenchConfig {
            n_sources: 4,
            pool_size: 4,
            thresholds: vec![0.25, 0.75],
            seed: 11,
        };
        let specs = default_feature_specs();
        let a = feature_bench(&index, &specs, &config).unwrap();
        let b = feature_bench(&index, &specs, &config).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!((x.threshold, x.tpr, x.fpr, x.f_score), (y.threshold, y.tpr, y.fpr, y.f_score));
        }
    }

    #[test]
    fn too_many_sources_is_an_error() {
        let corpus = bench_corpus(true);
        let index = CorpusIndex::build(&corpus);
        let config = FeatureBenchConfig {
            n_sources: 10_000,
            ..FeatureBenchConfig::default()
        };
        let err = feature_bench(&index, &default_feature_specs(), &config).unwrap_err();
        assert!(err.to_string().contains("10000"), "{err}");
    }

    #[test]
    fn oversized_pool_is_an_error() {
        let corpus = bench_corpus(true);
        let index = CorpusIndex::build(&corpus);
        let config = FeatureBenchConfig {
            n_sources: 2,
            pool_size: 10_000,
            ..FeatureBenchConfig::default()
        };
        assert!(feature_bench(&index, &default_feature_specs(), &config).is_err());
    }
}
