//! Cheap relational prefilter. Candidates are compared to the source
//! function through call-graph context only — no encoder involved — using
//! two scalar comparators: a relative-difference ratio for numeric features
//! and a common-subsequence ratio for sequence features.

mod features;
mod uprelation;

pub use features::{
    default_feature_specs, feature_bench, Feature, FeatureBenchConfig, FeatureBenchReport,
    FeatureBenchRow, FeatureBenchSummary, FeatureKind, FeatureSpec,
};
pub use uprelation::{
    retained_ids, up_relation, FilterBranch, FilterThresholds, FilterVerdict,
};

use crate::error::{Error, Result};

/// Sequences longer than this are truncated before the quadratic LCS pass;
/// real callee and string lists sit far below it.
pub const LCS_CAP: usize = 2000;

/// Relative-difference ratio of two non-negative values: 1 when equal,
/// falling toward 0 as they diverge. Two zeros count as identical.
pub fn rdr(v1: f64, v2: f64) -> Result<f64> {
    if !v1.is_finite() || !v2.is_finite() || v1 < 0.0 || v2 < 0.0 {
        return Err(Error::Domain(format!(
            "relative difference needs finite non-negative inputs, got {v1} and {v2}"
        )));
    }
    if v1 == 0.0 && v2 == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - (v1 - v2).abs() / v1.max(v2))
}

fn capped<'a, T>(s: &'a [T], what: &str) -> &'a [T] {
    if s.len() > LCS_CAP {
        log::warn!("truncating {what} of length {} to {LCS_CAP} for LCS", s.len());
        &s[..LCS_CAP]
    } else {
        s
    }
}

fn lcs_dp<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    // rolling rows: O(min-side) memory
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut prev = vec![0usize; short.len() + 1];
    let mut curr = vec![0usize; short.len() + 1];
    for x in long {
        for (j, y) in short.iter().enumerate() {
            curr[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[short.len()]
}

/// Longest common subsequence length (order-preserving, non-contiguous).
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    lcs_dp(capped(a, "sequence"), capped(b, "sequence"))
}

/// Common-sequence ratio: `2*LCS / (|a| + |b|)`. Two empty sequences are
/// identical (ratio 1).
pub fn csr<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    let a = capped(a, "sequence");
    let b = capped(b, "sequence");
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    2.0 * lcs_dp(a, b) as f64 / (a.len() + b.len()) as f64
}

/// Combines a true-positive rate and false-positive rate into one figure of
/// merit, `1 / (1/tpr + fpr)`: rises with tpr, falls with fpr, and equals
/// tpr when fpr is 0. Zero tpr scores 0.
pub fn f_score(tpr: f64, fpr: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&tpr) || !(0.0..=1.0).contains(&fpr) {
        return Err(Error::Domain(format!(
            "rates must lie in [0,1], got tpr={tpr} fpr={fpr}"
        )));
    }
    if tpr == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (1.0 / tpr + fpr))
}
