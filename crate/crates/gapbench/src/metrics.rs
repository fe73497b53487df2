//! Masked imputation metrics and the downstream classification metrics.
//!
//! Imputation errors are computed only over cells selected by the mask, since
//! ground truth is unknown elsewhere. Reductions run in a fixed sequential
//! order so results are bit-stable across runs.

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which masked error to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Mae,
    Mse,
    Mre,
}

/// Bundle of the three masked errors plus the number of evaluated cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mae: f64,
    pub mse: f64,
    pub mre: f64,
    pub n_evaluated: usize,
}

/// Masked error between an estimate and a target:
///
/// * MAE = sum |(est - target) * m| / sum m
/// * MSE = sum ((est - target) * m)^2 / sum m
/// * MRE = sum |(est - target) * m| / sum |target * m|
///
/// Cells with `m = 0` contribute nothing. Errors out when the mask is empty,
/// or for MRE when the denominator is zero.
pub fn masked_error(
    kind: ErrorKind,
    estimate: &Array3<f64>,
    target: &Array3<f64>,
    mask: &Array3<u8>,
) -> Result<f64> {
    check_shapes(estimate, target, mask)?;
    let mut n = 0usize;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut target_abs_sum = 0.0;
    for ((e, t), &m) in estimate.iter().zip(target.iter()).zip(mask.iter()) {
        if m == 1 {
            let diff = e - t;
            n += 1;
            abs_sum += diff.abs();
            sq_sum += diff * diff;
            target_abs_sum += t.abs();
        }
    }
    if n == 0 {
        return Err(Error::UndefinedMetric(
            "empty evaluation mask: no cell selected".into(),
        ));
    }
    match kind {
        ErrorKind::Mae => Ok(abs_sum / n as f64),
        ErrorKind::Mse => Ok(sq_sum / n as f64),
        ErrorKind::Mre => {
            if target_abs_sum == 0.0 {
                Err(Error::UndefinedMetric(
                    "relative error denominator is zero".into(),
                ))
            } else {
                Ok(abs_sum / target_abs_sum)
            }
        }
    }
}

/// All three masked errors in one pass.
pub fn metric_report(
    estimate: &Array3<f64>,
    target: &Array3<f64>,
    mask: &Array3<u8>,
) -> Result<MetricReport> {
    let mae = masked_error(ErrorKind::Mae, estimate, target, mask)?;
    let mse = masked_error(ErrorKind::Mse, estimate, target, mask)?;
    let mre = masked_error(ErrorKind::Mre, estimate, target, mask)?;
    let n_evaluated = mask.iter().map(|&m| m as usize).sum();
    Ok(MetricReport {
        mae,
        mse,
        mre,
        n_evaluated,
    })
}

fn check_shapes(estimate: &Array3<f64>, target: &Array3<f64>, mask: &Array3<u8>) -> Result<()> {
    if estimate.dim() != target.dim() || estimate.dim() != mask.dim() {
        return Err(Error::ShapeMismatch(format!(
            "estimate {:?}, target {:?}, mask {:?}",
            estimate.dim(),
            target.dim(),
            mask.dim()
        )));
    }
    Ok(())
}

/// Area under the ROC curve via the Mann-Whitney statistic: the probability
/// that a uniformly random positive outscores a uniformly random negative,
/// with ties counted one half. Requires both classes present.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(
            "roc_auc needs both classes present".into(),
        ));
    }
    // rank-sum over score-sorted order, average ranks within tie groups
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; tied entries share the mean rank of the group
        let mean_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                rank_sum_pos += mean_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

/// Average precision: mean over positives, taken in score-descending order,
/// of the precision at each positive's rank. Ties are broken by original
/// index order (stable sort). Requires at least one positive label.
pub fn pr_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    if n_pos == 0 {
        return Err(Error::UndefinedMetric(
            "pr_auc needs at least one positive label".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));
    let mut seen_pos = 0usize;
    let mut ap = 0.0;
    for (rank0, &idx) in order.iter().enumerate() {
        if labels[idx] == 1 {
            seen_pos += 1;
            ap += seen_pos as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(ap / n_pos as f64)
}
