//! Softmax cross-entropy over soft targets, and argmax prediction.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Argmax per row; ties break to the lowest index.
pub fn predict(logits: &Tensor) -> Vec<usize> {
    let mut labels = Vec::with_capacity(logits.rows());
    for r in 0..logits.rows() {
        labels.push(argmax(logits.row(r)));
    }
    labels
}

#[inline]
pub(crate) fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Row max, for the stable log-sum-exp shift.
#[inline]
fn row_max(row: &[f32]) -> f64 {
    row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v as f64))
}

/// log(sum(exp(z - max))) + max, in f64.
#[inline]
pub(crate) fn log_sum_exp(row: &[f32]) -> f64 {
    let m = row_max(row);
    let sum: f64 = row.iter().map(|&v| (v as f64 - m).exp()).sum();
    m + sum.ln()
}

/// Softmax probabilities of one row, f64 internally.
pub(crate) fn softmax_row(row: &[f32]) -> Vec<f64> {
    let m = row_max(row);
    let exps: Vec<f64> = row.iter().map(|&v| (v as f64 - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Checks that every target row is a probability vector.
pub(crate) fn validate_targets(targets: &Tensor) -> Result<()> {
    for r in 0..targets.rows() {
        let row = targets.row(r);
        let mut sum = 0.0f64;
        for &v in row {
            if !v.is_finite() {
                return Err(Error::InvalidTarget {
                    row: r,
                    reason: "non-finite entry".into(),
                });
            }
            if v < 0.0 {
                return Err(Error::InvalidTarget {
                    row: r,
                    reason: format!("negative entry {v}"),
                });
            }
            sum += v as f64;
        }
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidTarget {
                row: r,
                reason: format!("sums to {sum}, not 1"),
            });
        }
    }
    Ok(())
}

/// Cross-entropy of one row against a soft target: `lse(z) - sum(t * z)`.
#[inline]
pub(crate) fn row_cross_entropy(logits: &[f32], target: &[f32]) -> f64 {
    let lse = log_sum_exp(logits);
    let mut dot = 0.0f64;
    for (z, t) in logits.iter().zip(target) {
        dot += *z as f64 * *t as f64;
    }
    lse - dot
}

/// Mean over rows of `-sum_k t_k log softmax(z)_k`, with the row max
/// subtracted before exponentiation.
pub fn soft_cross_entropy(logits: &Tensor, targets: &Tensor) -> Result<f64> {
    if logits.shape() != targets.shape() {
        return Err(Error::ShapeMismatch {
            expected: logits.shape().to_vec(),
            got: targets.shape().to_vec(),
            context: "soft_cross_entropy".into(),
        });
    }
    validate_targets(targets)?;
    let n = logits.rows();
    let mut total = 0.0f64;
    for r in 0..n {
        total += row_cross_entropy(logits.row(r), targets.row(r));
    }
    Ok(total / n as f64)
}

/// Cross-entropy of a single sample against a one-hot label.
pub(crate) fn onehot_cross_entropy_single(logits: &[f32], label: usize) -> f64 {
    log_sum_exp(logits) - logits[label] as f64
}
