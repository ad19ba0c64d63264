//! Evaluation protocol: AUC, confusion-matrix metrics, and the
//! sensitivity-equals-specificity threshold rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Threshold, rates, and confusion counts for one evaluation.
///
/// Rates that are 0/0 are reported as `None` rather than coerced to 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub threshold: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
    pub f_measure: Option<f64>,
    pub auc: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl EvalReport {
    /// Aligned text table over the populated fields.
    pub fn text_table(&self) -> String {
        let fmt = |v: Option<f64>| match v {
            Some(x) => format!("{x:.6}"),
            None => "undefined".to_string(),
        };
        let mut out = String::new();
        let rows = [
            ("threshold", format!("{:.6}", self.threshold)),
            ("sensitivity", fmt(self.sensitivity)),
            ("specificity", fmt(self.specificity)),
            ("ppv", fmt(self.ppv)),
            ("npv", fmt(self.npv)),
            ("f_measure", fmt(self.f_measure)),
            ("auc", fmt(self.auc)),
            ("tp", self.tp.to_string()),
            ("fp", self.fp.to_string()),
            ("tn", self.tn.to_string()),
            ("fn", self.fn_.to_string()),
        ];
        for (name, value) in rows {
            out.push_str(&format!("{name:<12} {value}\n"));
        }
        out
    }
}

fn check_binary_labels(labels: &[u8]) -> Result<()> {
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::InvalidConfig("labels must be 0 or 1".into()));
    }
    Ok(())
}

fn class_counts(labels: &[u8]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    (pos, labels.len() - pos)
}

/// Area under the ROC curve by the rank (Mann-Whitney) statistic. Ties get
/// half credit; the result equals exhaustive pair counting exactly.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: scores.len(),
        });
    }
    check_binary_labels(labels)?;
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }

    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Average ranks within tied groups keep every rank a multiple of 0.5,
    // so the sums below are exact in f64 at these scales.
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }

    let p = pos as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * neg as f64))
}

/// Confusion counts and rates at threshold `tau` (predict 1 iff prob >= tau).
/// The returned report has `auc: None`.
pub fn confusion_metrics(probs: &[f64], labels: &[u8], tau: f64) -> Result<EvalReport> {
    if probs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: probs.len(),
        });
    }
    if probs.is_empty() {
        return Err(Error::InvalidConfig("need at least one row".into()));
    }
    check_binary_labels(labels)?;

    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (&prob, &y) in probs.iter().zip(labels) {
        let pred = prob >= tau;
        match (pred, y) {
            (true, 1) => tp += 1,
            (true, 0) => fp += 1,
            (false, 0) => tn += 1,
            (false, 1) => fn_ += 1,
            _ => unreachable!(),
        }
    }

    let rate = |num: usize, den: usize| {
        if den == 0 {
            None
        } else {
            Some(num as f64 / den as f64)
        }
    };
    let sensitivity = rate(tp, tp + fn_);
    let specificity = rate(tn, tn + fp);
    let ppv = rate(tp, tp + fp);
    let npv = rate(tn, tn + fn_);
    let f_measure = match (sensitivity, ppv) {
        (Some(s), Some(p)) if s + p > 0.0 => Some(2.0 * s * p / (s + p)),
        _ => None,
    };

    Ok(EvalReport {
        threshold: tau,
        sensitivity,
        specificity,
        ppv,
        npv,
        f_measure,
        auc: None,
        tp,
        fp,
        tn,
        fn_,
    })
}

/// Candidate thresholds: midpoints of sorted distinct probabilities plus the
/// 0 and 1 boundaries.
pub fn threshold_candidates(probs: &[f64]) -> Vec<f64> {
    let mut distinct: Vec<f64> = probs.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut out = vec![0.0];
    for pair in distinct.windows(2) {
        out.push(0.5 * (pair[0] + pair[1]));
    }
    out.push(1.0);
    out
}

/// The threshold at which training sensitivity best matches specificity:
/// over all candidates, minimize |sensitivity - specificity|, breaking ties
/// toward the smaller threshold.
pub fn select_threshold(probs: &[f64], labels: &[u8]) -> Result<f64> {
    check_binary_labels(labels)?;
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }

    let mut best_tau = 0.0;
    let mut best_gap = f64::INFINITY;
    for tau in threshold_candidates(probs) {
        let report = confusion_metrics(probs, labels, tau)?;
        // Both classes present, so both rates are defined.
        let gap = (report.sensitivity.unwrap() - report.specificity.unwrap()).abs();
        if gap < best_gap {
            best_gap = gap;
            best_tau = tau;
        }
    }
    Ok(best_tau)
}

/// ROC points (fpr, tpr) swept over the candidate thresholds, sorted by fpr
/// then tpr, with the (0,0) and (1,1) endpoints included.
pub fn roc_points(scores: &[f64], labels: &[u8]) -> Result<Vec<(f64, f64)>> {
    check_binary_labels(labels)?;
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut points = Vec::new();
    for tau in threshold_candidates(scores) {
        let (mut tp, mut fp) = (0usize, 0usize);
        for (&sc, &y) in scores.iter().zip(labels) {
            if sc >= tau {
                if y == 1 {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    points.push((0.0, 0.0));
    points.push((1.0, 1.0));
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.dedup();
    Ok(points)
}
