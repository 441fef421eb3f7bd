//! Relational candidate filter. The source function picks one primary check
//! based on what its call-graph context offers, in fixed preference order:
//!
//! 1. dynamically linked callee names compared by sequence ratio;
//! 2. otherwise total callee count compared by relative difference;
//! 3. otherwise (a pure leaf) caller support: a candidate survives only if
//!    some function calling it passes the same filter against one of the
//!    source's callers.
//!
//! An additional string-constant check runs after the primary one whenever
//! the source has string constants. Scores equal to a threshold are kept;
//! checks the source cannot support are skipped rather than failed, with the
//! skip recorded on the verdict.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{csr, rdr};
use crate::corpus::{CorpusIndex, FuncId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterThresholds {
    /// Minimum sequence ratio between dynamic-callee name lists.
    pub t_gl: f64,
    /// Minimum relative-difference ratio between callee counts.
    pub t_callee: f64,
    /// Minimum sequence ratio between sorted string-constant lists.
    pub t_string: f64,
    /// How many caller hops the leaf-function branch may take.
    pub max_caller_depth: usize,
}

impl Default for FilterThresholds {
    fn default() -> Self {
        FilterThresholds {
            t_gl: 0.1,
            t_callee: 0.8,
            t_string: 0.8,
            max_caller_depth: 2,
        }
    }
}

impl FilterThresholds {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("t_gl", self.t_gl),
            ("t_callee", self.t_callee),
            ("t_string", self.t_string),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Param(format!("{name} must lie in [0,1], got {value}")));
            }
        }
        Ok(())
    }

    fn all_zero(&self) -> bool {
        self.t_gl == 0.0 && self.t_callee == 0.0 && self.t_string == 0.0
    }
}

/// Which primary check the source function selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterBranch {
    GlCsr,
    CalleeCount,
    CallerRelation,
}

/// Outcome for one candidate, with every score that was computed for it.
#[derive(Debug, Clone)]
pub struct FilterVerdict {
    pub candidate: FuncId,
    pub retained: bool,
    pub branch: FilterBranch,
    pub scores: BTreeMap<String, f64>,
    /// True when at least one check was skipped because the source function
    /// could not support it (no callers in reach, or no strings).
    pub missing: bool,
}

/// Filters `tfl` against source `fv`. Output is one verdict per candidate
/// in input order; callers typically keep `retained` ones only.
pub fn up_relation(
    fv: FuncId,
    tfl: &[FuncId],
    index: &CorpusIndex<'_>,
    thresholds: &FilterThresholds,
) -> Result<Vec<FilterVerdict>> {
    thresholds.validate()?;
    for &id in std::iter::once(&fv).chain(tfl) {
        if id.0 >= index.len() {
            return Err(Error::Param(format!(
                "function id {} out of range for index of {} functions",
                id.0,
                index.len()
            )));
        }
    }
    let mut visited = vec![fv];
    Ok(evaluate(fv, tfl, index, thresholds, 0, &mut visited))
}

/// Convenience projection of the retained candidate ids, in input order.
pub fn retained_ids(verdicts: &[FilterVerdict]) -> Vec<FuncId> {
    verdicts
        .iter()
        .filter(|v| v.retained)
        .map(|v| v.candidate)
        .collect()
}

fn evaluate(
    fv: FuncId,
    tfl: &[FuncId],
    index: &CorpusIndex<'_>,
    t: &FilterThresholds,
    depth: usize,
    visited: &mut Vec<FuncId>,
) -> Vec<FilterVerdict> {
    let gl_src = index.gl(fv);
    let callee_count_src = index.callee_count(fv);

    let mut verdicts: Vec<FilterVerdict> = if !gl_src.is_empty() {
        tfl.iter()
            .map(|&ci| {
                let score = csr(gl_src, index.gl(ci));
                verdict(ci, FilterBranch::GlCsr, "gl_csr", score, score >= t.t_gl)
            })
            .collect()
    } else if callee_count_src > 0 {
        tfl.iter()
            .map(|&ci| {
                let score = rdr(callee_count_src as f64, index.callee_count(ci) as f64)
                    .expect("counts are non-negative");
                verdict(ci, FilterBranch::CalleeCount, "callee_rdr", score, score >= t.t_callee)
            })
            .collect()
    } else {
        caller_relation(fv, tfl, index, t, depth, visited)
    };

    // Secondary check: string constants, skipped when the source has none.
    let strings_src = index.strings_sorted(fv);
    if strings_src.is_empty() {
        for v in &mut verdicts {
            v.missing = true;
        }
    } else {
        for v in &mut verdicts {
            if !v.retained {
                continue;
            }
            let score = csr(strings_src, index.strings_sorted(v.candidate));
            v.scores.insert("string_csr".into(), score);
            v.retained = score >= t.t_string;
        }
    }
    verdicts
}

fn verdict(ci: FuncId, branch: FilterBranch, key: &str, score: f64, retained: bool) -> FilterVerdict {
    let mut scores = BTreeMap::new();
    scores.insert(key.to_string(), score);
    FilterVerdict {
        candidate: ci,
        retained,
        branch,
        scores,
        missing: false,
    }
}

/// Leaf-source branch: a candidate is supported when some caller of it,
/// filtered against the source's callers, survives. With all thresholds at
/// zero every check downstream retains everything, so the walk is skipped.
fn caller_relation(
    fv: FuncId,
    tfl: &[FuncId],
    index: &CorpusIndex<'_>,
    t: &FilterThresholds,
    depth: usize,
    visited: &mut Vec<FuncId>,
) -> Vec<FilterVerdict> {
    let support_all = |missing: bool| -> Vec<FilterVerdict> {
        tfl.iter()
            .map(|&ci| {
                let mut v = verdict(ci, FilterBranch::CallerRelation, "caller_support", 1.0, true);
                v.missing = missing;
                v
            })
            .collect()
    };

    if t.all_zero() {
        return support_all(false);
    }
    let callers: Vec<FuncId> = index
        .callers(fv)
        .iter()
        .copied()
        .filter(|p| !visited.contains(p))
        .collect();
    if callers.is_empty() || depth >= t.max_caller_depth {
        // nothing to compare against: fail open
        return support_all(true);
    }

    // Caller-side candidate pool: everything that calls one of our candidates.
    let mut caller_pool: Vec<FuncId> = tfl
        .iter()
        .flat_map(|&ci| index.callers(ci).iter().copied())
        .collect();
    caller_pool.sort_unstable();
    caller_pool.dedup();

    let mut supported: Vec<FuncId> = Vec::new();
    for p in callers {
        visited.push(p);
        let caller_verdicts = evaluate(p, &caller_pool, index, t, depth + 1, visited);
        visited.pop();
        for cv in caller_verdicts {
            if cv.retained {
                supported.extend_from_slice(index.internal_callees(cv.candidate));
            }
        }
    }
    supported.sort_unstable();
    supported.dedup();

    tfl.iter()
        .map(|&ci| {
            let hit = supported.binary_search(&ci).is_ok();
            verdict(
                ci,
                FilterBranch::CallerRelation,
                "caller_support",
                if hit { 1.0 } else { 0.0 },
                hit,
            )
        })
        .collect()
}
