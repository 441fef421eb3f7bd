//! Threshold-free metrics. ROC points sweep every distinct score from high
//! to low with infinite sentinels at both ends; a pair scores positive at
//! threshold `t` when its score is `>= t`. Ranking metrics take 1-based
//! ranks, `None` meaning the target never appeared.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RocReport {
    pub auc: f64,
    pub points: Vec<RocPoint>,
}

/// Builds the ROC curve of `(score, is_positive)` pairs and integrates it
/// with the trapezoid rule, which weights tied scores at one half — so the
/// area equals the probability that a random positive outscores a random
/// negative.
pub fn roc_auc(scored: &[(f64, bool)]) -> Result<RocReport> {
    if scored.iter().any(|(s, _)| s.is_nan()) {
        return Err(Error::Domain("ROC scores must not be NaN".into()));
    }
    let positives = scored.iter().filter(|(_, y)| *y).count();
    let negatives = scored.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Dataset(format!(
            "ROC needs both classes, got {positives} positives and {negatives} negatives"
        )));
    }

    let mut thresholds: Vec<f64> = scored.iter().map(|(s, _)| *s).collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).expect("NaN rejected above"));
    thresholds.dedup();

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        tpr: 0.0,
        fpr: 0.0,
    }];
    for t in thresholds {
        let tp = scored.iter().filter(|(s, y)| *y && *s >= t).count();
        let fp = scored.iter().filter(|(s, y)| !*y && *s >= t).count();
        points.push(RocPoint {
            threshold: t,
            tpr: tp as f64 / positives as f64,
            fpr: fp as f64 / negatives as f64,
        });
    }
    points.push(RocPoint {
        threshold: f64::NEG_INFINITY,
        tpr: 1.0,
        fpr: 1.0,
    });

    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum();
    Ok(RocReport { auc, points })
}

/// Mean reciprocal rank. Queries whose target never appeared contribute 0.
pub fn mrr(ranks: &[Option<usize>]) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::Dataset("MRR over zero queries is undefined".into()));
    }
    if ranks.iter().any(|r| *r == Some(0)) {
        return Err(Error::Param("ranks are 1-based; got rank 0".into()));
    }
    let total: f64 = ranks.iter().map(|r| r.map_or(0.0, |r| 1.0 / r as f64)).sum();
    Ok(total / ranks.len() as f64)
}

/// Fraction of queries whose target ranked within the top `k`.
pub fn recall_at_k(ranks: &[Option<usize>], k: usize) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::Dataset("recall over zero queries is undefined".into()));
    }
    if k == 0 {
        return Err(Error::Param("recall@k needs k >= 1".into()));
    }
    if ranks.iter().any(|r| *r == Some(0)) {
        return Err(Error::Param("ranks are 1-based; got rank 0".into()));
    }
    let hits = ranks.iter().filter(|r| matches!(r, Some(r) if *r <= k)).count();
    Ok(hits as f64 / ranks.len() as f64)
}
