//! Callee-structure re-ranking of the encoder's top candidates. A callee is
//! *named* when it resolves through the dynamic symbol table (the name
//! survives stripping) and *anonymous* otherwise. Named callees match by
//! multiset intersection; anonymous ones are matched by encoding their own
//! bodies and taking, for each candidate callee, its best similarity
//! against the source's anonymous callees. The final order blends the model
//! score with this structural match score.

use ndarray::Array1;
use serde::Serialize;

use crate::corpus::{BinaryRecord, CorpusIndex, FuncId, FunctionRecord};
use crate::error::{Error, Result};

/// Split callee view of one function.
#[derive(Debug)]
pub struct Mcfs<'a> {
    /// Dynamically-resolved callee names, sorted, with multiplicity.
    pub named: Vec<&'a str>,
    /// Statically-linked callees resolved to their records, call-site order.
    pub anonymous: Vec<&'a FunctionRecord>,
}

impl Mcfs<'_> {
    pub fn is_empty(&self) -> bool {
        self.named.is_empty() && self.anonymous.is_empty()
    }
}

/// Builds the callee view of `f` within its binary. Anonymous callees that
/// do not resolve to a local function are skipped with a warning.
pub fn build_mcfs<'a>(f: &'a FunctionRecord, b: &'a BinaryRecord) -> Mcfs<'a> {
    let mut named = Vec::new();
    let mut anonymous = Vec::new();
    for callee in &f.callees {
        if callee.dynamic {
            named.push(callee.name.as_str());
        } else if let Some(target) = b.functions.get(&callee.name) {
            anonymous.push(target);
        } else {
            log::warn!(
                "{}:{} calls unresolvable local function {:?}; ignoring it",
                b.binary_id,
                f.id,
                callee.name
            );
        }
    }
    named.sort_unstable();
    Mcfs { named, anonymous }
}

/// Structural match of a candidate's callees against the source's.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchScore {
    /// Multiset intersection size of the named callee lists.
    pub named: usize,
    /// Best source similarity per candidate anonymous callee.
    pub anon_scores: Vec<f64>,
    pub total: f64,
}

fn multiset_intersection(a: &[&str], b: &[&str]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Scores `candidate` against `source`. `sim` measures two anonymous callee
/// bodies; candidates' anonymous callees contribute nothing when the source
/// has none to compare against.
pub fn match_score<F>(source: &Mcfs<'_>, candidate: &Mcfs<'_>, sim: &mut F) -> Result<MatchScore>
where
    F: FnMut(&FunctionRecord, &FunctionRecord) -> Result<f64>,
{
    let named = multiset_intersection(&source.named, &candidate.named);
    let mut anon_scores = Vec::with_capacity(candidate.anonymous.len());
    for cand_callee in &candidate.anonymous {
        let mut best = 0.0f64;
        for src_callee in &source.anonymous {
            let s = sim(src_callee, cand_callee)?;
            if s > best {
                best = s;
            }
        }
        anon_scores.push(best);
    }
    let total = named as f64 + anon_scores.iter().sum::<f64>();
    Ok(MatchScore {
        named,
        anon_scores,
        total,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RerankOptions {
    /// Weight of the model similarity in the final score.
    pub alpha: f64,
    /// Weight of the structural match score.
    pub beta: f64,
    /// Rescale match scores by the maximum across candidates, so the final
    /// score stays within [0, 1]. Off by default: raw match scores rank
    /// candidates with many matching callees more decisively.
    pub normalize: bool,
}

impl Default for RerankOptions {
    fn default() -> Self {
        RerankOptions {
            alpha: 0.1,
            beta: 0.9,
            normalize: false,
        }
    }
}

impl RerankOptions {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(Error::Param(format!(
                "rerank weights must be non-negative, got alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        if (self.alpha + self.beta - 1.0).abs() > 1e-9 {
            return Err(Error::Param(format!(
                "rerank weights must sum to 1, got alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RerankEntry {
    pub candidate: FuncId,
    pub model_sim: f64,
    /// Match score as blended into `final_score` (normalized when enabled);
    /// `None` when the leaf path ranked by model similarity alone.
    pub match_score: Option<f64>,
    /// Named and per-anonymous-callee breakdown behind `match_score`.
    pub detail: Option<MatchScore>,
    pub final_score: f64,
}

/// Re-orders scored candidates by callee structure. When the source has no
/// callees at all there is nothing to match, so candidates with callees are
/// dropped (they disagree structurally) and the rest keep their model
/// ranking. Ties break toward the smaller candidate id.
pub fn rerank<F>(
    source: FuncId,
    candidates: &[(FuncId, f64)],
    index: &CorpusIndex<'_>,
    sim: &mut F,
    options: &RerankOptions,
) -> Result<Vec<RerankEntry>>
where
    F: FnMut(&FunctionRecord, &FunctionRecord) -> Result<f64>,
{
    options.validate()?;
    let src_mcfs = build_mcfs(index.record(source), index.binary_of(source));

    let mut entries: Vec<RerankEntry> = if src_mcfs.is_empty() {
        candidates
            .iter()
            .filter(|&&(ci, _)| index.record(ci).callees.is_empty())
            .map(|&(ci, model_sim)| RerankEntry {
                candidate: ci,
                model_sim,
                match_score: None,
                detail: None,
                final_score: model_sim,
            })
            .collect()
    } else {
        let scored: Vec<(FuncId, f64, MatchScore)> = candidates
            .iter()
            .map(|&(ci, model_sim)| {
                let cand_mcfs = build_mcfs(index.record(ci), index.binary_of(ci));
                match_score(&src_mcfs, &cand_mcfs, sim).map(|m| (ci, model_sim, m))
            })
            .collect::<Result<_>>()?;
        let max_total = scored
            .iter()
            .map(|(_, _, m)| m.total)
            .fold(0.0f64, f64::max);
        scored
            .into_iter()
            .map(|(ci, model_sim, m)| {
                let used = if options.normalize {
                    if max_total > 0.0 {
                        m.total / max_total
                    } else {
                        0.0
                    }
                } else {
                    m.total
                };
                RerankEntry {
                    candidate: ci,
                    model_sim,
                    match_score: Some(used),
                    detail: Some(m),
                    final_score: options.alpha * model_sim + options.beta * used,
                }
            })
            .collect()
    };

    entries.sort_by(|a, b| {
        b.final_score
            .partial_cmp(&a.final_score)
            .expect("scores are finite")
            .then(a.candidate.cmp(&b.candidate))
    });
    Ok(entries)
}

/// Model similarity between two anonymous callee bodies with per-function
/// encoding cache; the counter tracks distinct encodings for cost reporting.
pub fn cached_callee_sim<'a>(
    model: &'a crate::siamese::SiameseModel,
    counter: &'a mut usize,
) -> impl FnMut(&FunctionRecord, &FunctionRecord) -> Result<f64> + 'a {
    let mut cache: std::collections::HashMap<(String, String), Array1<f64>> =
        std::collections::HashMap::new();
    move |a: &FunctionRecord, b: &FunctionRecord| {
        for f in [a, b] {
            let key = (f.binary_id.clone(), f.id.clone());
            if !cache.contains_key(&key) {
                cache.insert(key, crate::treelstm::encode_tree(&f.ast, &model.encoder)?);
                *counter += 1;
            }
        }
        let ha = &cache[&(a.binary_id.clone(), a.id.clone())];
        let hb = &cache[&(b.binary_id.clone(), b.id.clone())];
        Ok(crate::siamese::score_pair(ha, hb, &model.w)?.sim)
    }
}
