//! Dataset builders: labeled function pairs for training, and the
//! classification (g) and retrieval (v) tuple sets for evaluation.
//!
//! Sampling rules shared by all builders: only named functions participate
//! (stripped functions carry no homology key, so their labels cannot be
//! trusted), and non-homologous picks never reuse the source's name — a
//! same-name function from another library might be a duplicated copy, so
//! it is excluded outright rather than labeled non-homologous.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::index::{CorpusIndex, FuncId};
use crate::error::{Error, Result};

/// One labeled training pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FunctionPair {
    pub a: FuncId,
    pub b: FuncId,
    pub homologous: bool,
}

/// Train/test pair split. Equal homologous/non-homologous counts overall and
/// per split; no pair occurs in both splits.
#[derive(Debug, Clone)]
pub struct PairDataset {
    pub train: Vec<FunctionPair>,
    pub test: Vec<FunctionPair>,
}

/// Classification tuple: source with its homolog and one non-homolog.
#[derive(Debug, Clone)]
pub struct GDatasetTuple {
    pub source: FuncId,
    /// `[homolog, non-homolog]`.
    pub pool: [FuncId; 2],
    pub homolog_pos: usize,
}

/// Retrieval tuple: source plus a pool holding exactly one homolog.
#[derive(Debug, Clone)]
pub struct VDatasetTuple {
    pub source: FuncId,
    pub pool: Vec<FuncId>,
    pub homolog_pos: usize,
}

impl VDatasetTuple {
    pub fn homolog(&self) -> FuncId {
        self.pool[self.homolog_pos]
    }
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Named functions whose name differs from `source`'s and which live in a
/// different binary.
fn eligible_negatives(index: &CorpusIndex, source: FuncId) -> Vec<FuncId> {
    let src = index.record(source);
    index
        .ids()
        .filter(|&id| {
            let rec = index.record(id);
            rec.is_named() && rec.name != src.name && rec.binary_id != src.binary_id
        })
        .collect()
}

/// Sources eligible for tuple construction: named, with at least one
/// homolog, in deterministic id order.
fn eligible_sources(index: &CorpusIndex) -> Vec<FuncId> {
    index
        .ids()
        .filter(|&id| index.record(id).is_named() && !index.homologs(id).is_empty())
        .collect()
}

/// Builds balanced homologous/non-homologous pairs and splits them
/// `split_ratio` to train. Homologous pairs: per homology group, one random
/// pivot paired with every other member.
pub fn build_pair_dataset(
    index: &CorpusIndex,
    split_ratio: f64,
    seed: u64,
) -> Result<PairDataset> {
    if !(split_ratio > 0.0 && split_ratio < 1.0) {
        return Err(Error::Param(format!(
            "split_ratio must lie in (0,1), got {split_ratio}"
        )));
    }
    let mut rng = rng_for(seed);

    let mut homologous = Vec::new();
    for (_, members) in index.homology_groups() {
        if members.len() < 2 {
            continue;
        }
        let pivot = members[rng.random_range(0..members.len())];
        for &other in members {
            if other != pivot {
                homologous.push(FunctionPair {
                    a: pivot,
                    b: other,
                    homologous: true,
                });
            }
        }
    }
    if homologous.is_empty() {
        return Err(Error::Dataset("no homologous pairs derivable".into()));
    }

    let named: Vec<FuncId> = index
        .ids()
        .filter(|&id| index.record(id).is_named())
        .collect();
    let mut negatives = Vec::with_capacity(homologous.len());
    let mut seen = std::collections::HashSet::new();
    let mut attempts = 0usize;
    let max_attempts = homologous.len().saturating_mul(200).max(10_000);
    while negatives.len() < homologous.len() {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Dataset(format!(
                "could not sample {} distinct non-homologous pairs (got {})",
                homologous.len(),
                negatives.len()
            )));
        }
        let a = named[rng.random_range(0..named.len())];
        let b = named[rng.random_range(0..named.len())];
        if a == b || index.record(a).name == index.record(b).name {
            continue;
        }
        let key = (a.min(b), a.max(b));
        if !seen.insert(key) {
            continue;
        }
        negatives.push(FunctionPair {
            a,
            b,
            homologous: false,
        });
    }

    homologous.shuffle(&mut rng);
    negatives.shuffle(&mut rng);
    let cut_h = ((homologous.len() as f64) * split_ratio).round() as usize;
    let cut_n = ((negatives.len() as f64) * split_ratio).round() as usize;
    let (test_h, train_h) = {
        let test = homologous.split_off(cut_h.min(homologous.len()));
        (test, homologous)
    };
    let (test_n, train_n) = {
        let test = negatives.split_off(cut_n.min(negatives.len()));
        (test, negatives)
    };

    let mut train: Vec<FunctionPair> = train_h.into_iter().chain(train_n).collect();
    let mut test: Vec<FunctionPair> = test_h.into_iter().chain(test_n).collect();
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    Ok(PairDataset { train, test })
}

/// One (source, (homolog, non-homolog)) tuple per eligible source.
pub fn build_g_dataset(index: &CorpusIndex, seed: u64) -> Result<Vec<GDatasetTuple>> {
    let mut rng = rng_for(seed);
    let sources = eligible_sources(index);
    if sources.is_empty() {
        return Err(Error::Dataset("no homologous pairs derivable".into()));
    }
    let mut tuples = Vec::with_capacity(sources.len());
    for source in sources {
        let homologs = index.homologs(source);
        let homolog = homologs[rng.random_range(0..homologs.len())];
        let negatives = eligible_negatives(index, source);
        if negatives.is_empty() {
            return Err(Error::Dataset(format!(
                "required 1 non-homologous candidate for {}, only 0 available",
                index.display_key(source)
            )));
        }
        let negative = negatives[rng.random_range(0..negatives.len())];
        tuples.push(GDatasetTuple {
            source,
            pool: [homolog, negative],
            homolog_pos: 0,
        });
    }
    Ok(tuples)
}

/// One retrieval tuple per eligible source: `pool_size` non-homologs plus
/// the homolog at a uniformly random position.
pub fn build_v_dataset(
    index: &CorpusIndex,
    pool_size: usize,
    seed: u64,
) -> Result<Vec<VDatasetTuple>> {
    let mut rng = rng_for(seed);
    let sources = eligible_sources(index);
    if sources.is_empty() {
        return Err(Error::Dataset("no homologous pairs derivable".into()));
    }
    let mut tuples = Vec::with_capacity(sources.len());
    for source in sources {
        let homologs = index.homologs(source);
        let homolog = homologs[rng.random_range(0..homologs.len())];
        let negatives = eligible_negatives(index, source);
        if negatives.len() < pool_size {
            return Err(Error::Dataset(format!(
                "required {pool_size} non-homologous candidates for {}, only {} available",
                index.display_key(source),
                negatives.len()
            )));
        }
        let picks = rand::seq::index::sample(&mut rng, negatives.len(), pool_size);
        let mut pool: Vec<FuncId> = picks.iter().map(|i| negatives[i]).collect();
        let homolog_pos = rng.random_range(0..=pool.len());
        pool.insert(homolog_pos, homolog);
        tuples.push(VDatasetTuple {
            source,
            pool,
            homolog_pos,
        });
    }
    Ok(tuples)
}
