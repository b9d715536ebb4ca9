use serde::Serialize;

use super::EvalError;

/// Rank-based AUROC with average ranks for ties:
/// `(R_pos - n_pos (n_pos + 1) / 2) / (n_pos n_neg)`.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    assert_eq!(
        scores.len(),
        labels.len(),
        "scores and labels lengths differ"
    );
    let n_pos = labels.iter().filter(|&&b| b).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::UndefinedMetric);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1 ..= j+1 share their mean.
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum_pos += avg * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let np = n_pos as f64;
    Ok((rank_sum_pos - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ThresholdMetrics {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// No predicted positives.
    pub precision_degenerate: bool,
    /// No actual positives.
    pub recall_degenerate: bool,
}

/// Confusion counts with `score >= threshold` predicted positive. Zero
/// denominators give 0 and set the matching flag.
pub fn f1_at_threshold(scores: &[f64], labels: &[bool], threshold: f64) -> ThresholdMetrics {
    let mut m = ThresholdMetrics {
        threshold,
        ..Default::default()
    };
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y) {
            (true, true) => m.tp += 1,
            (true, false) => m.fp += 1,
            (false, false) => m.tn += 1,
            (false, true) => m.fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    m.precision_degenerate = m.tp + m.fp == 0;
    m.recall_degenerate = m.tp + m.fn_ == 0;
    m.precision = ratio(m.tp, m.tp + m.fp);
    m.recall = ratio(m.tp, m.tp + m.fn_);
    m.f1 = if m.precision + m.recall > 0.0 {
        2.0 * m.precision * m.recall / (m.precision + m.recall)
    } else {
        0.0
    };
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricReport {
    /// `NaN` when the test fold holds a single class.
    pub auroc: f64,
    pub at_threshold: ThresholdMetrics,
}

impl MetricReport {
    pub fn compute(scores: &[f64], labels: &[bool]) -> MetricReport {
        MetricReport {
            auroc: auroc(scores, labels).unwrap_or(f64::NAN),
            at_threshold: f1_at_threshold(scores, labels, 0.5),
        }
    }

    pub fn f1(&self) -> f64 {
        self.at_threshold.f1
    }
}
