use serde::Serialize;
use thiserror::Error;

use super::ddi::DdiLabel;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("AUC needs both classes; got {positives} positives and {negatives} negatives")]
    SingleClass { positives: usize, negatives: usize },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl PrecisionRecall {
    /// With `0/0 := 0`.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        PrecisionRecall { precision, recall, f1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BinaryMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `None` when only one class is present.
    pub auc: Option<f64>,
}

/// Area under the ROC curve as the Mann–Whitney statistic: the fraction of
/// (positive, negative) pairs ranked correctly, ties counting one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricError::SingleClass { positives, negatives });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the positive rank sum, with tied groups sharing their mean rank
    let mut doubled_rank_sum: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let pos_in_group = order[start..end].iter().filter(|&&i| labels[i]).count() as u128;
        // 1-based ranks start+1..=end have mean (start + 1 + end) / 2
        doubled_rank_sum += pos_in_group * (start as u128 + 1 + end as u128);
        start = end;
    }
    let p = positives as u128;
    let doubled_u = doubled_rank_sum - p * (p + 1);
    Ok(doubled_u as f64 / (2 * p * negatives as u128) as f64)
}

/// Precision, recall and F1 with `score >= threshold` counted as positive,
/// plus the AUC when both classes occur.
pub fn evaluate_binary(scores: &[f64], labels: &[bool], threshold: f64) -> Result<BinaryMetrics, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let pr = PrecisionRecall::from_counts(tp, fp, fn_);
    Ok(BinaryMetrics { precision: pr.precision, recall: pr.recall, f1: pr.f1, auc: auc(scores, labels).ok() })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DdiMetrics {
    /// Mechanism, effect, advice, int.
    pub per_type: [PrecisionRecall; 4],
    pub micro: PrecisionRecall,
}

/// Scores over the four positive types only. A positive prediction of the
/// wrong type counts as both a false positive and a false negative;
/// confusions among negatives do not count at all.
pub fn evaluate_ddi(predictions: &[DdiLabel], gold: &[DdiLabel]) -> Result<DdiMetrics, MetricError> {
    if predictions.len() != gold.len() {
        return Err(MetricError::LengthMismatch { scores: predictions.len(), labels: gold.len() });
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    let mut per = [(0usize, 0usize, 0usize); 4];
    for (&p, &g) in predictions.iter().zip(gold) {
        if p.is_positive() {
            if p == g {
                tp += 1;
                per[p.index()].0 += 1;
            } else {
                fp += 1;
                per[p.index()].1 += 1;
            }
        }
        if g.is_positive() && p != g {
            fn_ += 1;
            per[g.index()].2 += 1;
        }
    }
    Ok(DdiMetrics {
        per_type: per.map(|(t, f, n)| PrecisionRecall::from_counts(t, f, n)),
        micro: PrecisionRecall::from_counts(tp, fp, fn_),
    })
}
