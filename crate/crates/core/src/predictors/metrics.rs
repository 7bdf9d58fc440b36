use serde::{Deserialize, Serialize};

use super::Scorer;
use crate::data::Dataset;
use crate::error::{shape, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub balanced_accuracy: f64,
    pub auc: f64,
    pub threshold: f64,
}

fn check(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return shape(format!("{} scores for {} labels", scores.len(), labels.len()));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Metric("evaluation data contains a single class".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Metric("NaN score".into()));
    }
    Ok((pos, neg))
}

/// Area under the ROC curve via the rank-sum statistic; ties get mid-ranks.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = check(scores, labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            if labels[k] == 1 {
                rank_sum += mid;
            }
        }
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Balanced accuracy at the threshold maximizing Youden's J
/// (`score >= t` predicts positive). Returns `(balanced accuracy, t)`.
pub fn balanced_accuracy(scores: &[f64], labels: &[u8]) -> Result<(f64, f64)> {
    let (pos, neg) = check(scores, labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    // everything negative to start with
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut best_j = 0.0;
    let mut best_t = f64::INFINITY;
    let mut i = 0;
    while i < idx.len() {
        let t = scores[idx[i]];
        while i < idx.len() && scores[idx[i]] == t {
            if labels[idx[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let j = tp as f64 / pos as f64 - fp as f64 / neg as f64;
        if j > best_j {
            best_j = j;
            best_t = t;
        }
    }
    Ok(((best_j + 1.0) / 2.0, best_t))
}

pub fn eval_metrics<S: Scorer + ?Sized>(model: &S, data: &Dataset) -> Result<Metrics> {
    let scores = data.rows().map(|r| model.score(r)).collect::<Result<Vec<_>>>()?;
    eval_scores(&scores, data.labels())
}

pub fn eval_scores(scores: &[f64], labels: &[u8]) -> Result<Metrics> {
    let (ba, threshold) = balanced_accuracy(scores, labels)?;
    Ok(Metrics { balanced_accuracy: ba, auc: auc(scores, labels)?, threshold })
}
