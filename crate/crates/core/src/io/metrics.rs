//! Link-prediction scoring.

use serde::Serialize;

use super::split::EvalSplit;
use crate::error::{Result, SppError};
use crate::relmodel::{predict, ModelSnapshot};

/// Area under the ROC curve as the Mann-Whitney statistic, ties given
/// average ranks.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(SppError::InvalidParameter("scores and labels differ in length".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(SppError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mean_rank = (i + j + 2) as f64 / 2.0;
        for &o in &order[i..=j] {
            if labels[o] {
                rank_sum += mean_rank;
            }
        }
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Mean and sample standard deviation of per-split AUCs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AucReport {
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl AucReport {
    pub fn from_values(values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { values, mean, std }
    }
}

/// Held-out AUC of posterior-mean predictions on one split.
pub fn split_auc(samples: &[ModelSnapshot], split: &EvalSplit) -> Result<f64> {
    let scores = predict(samples, &split.test)?;
    auc(&scores, &split.labels)
}

/// AUC of `samples` on each split, summarized.
pub fn evaluate(samples: &[ModelSnapshot], splits: &[EvalSplit]) -> Result<AucReport> {
    if samples.is_empty() || splits.is_empty() {
        return Err(SppError::EmptyInput);
    }
    let values = splits
        .iter()
        .map(|s| split_auc(samples, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(AucReport::from_values(values))
}
