//! Score matrices and the handful of operations everything else builds on.
//!
//! A score row is any real-valued vector over classes; logits and log
//! probabilities are both fine. Softmax here always subtracts the row max
//! before exponentiating, so well-separated logits cannot overflow.

use ndarray::{Array2, ArrayView1};

use crate::error::{CoreError, Result};

/// Tolerance for "these probabilities sum to one" checks on softmax output.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Tolerance for class-marginal normalization, looser because marginals are
/// routinely estimated from counts.
pub const MARGINAL_SUM_TOL: f64 = 1e-9;

/// An `n × k` matrix of finite class scores, `k >= 2`.
///
/// `n = 0` is allowed; operations that need rows reject it explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    scores: Array2<f64>,
}

impl ScoreSet {
    pub fn new(scores: Array2<f64>) -> Result<Self> {
        let k = scores.ncols();
        if k < 2 {
            return Err(CoreError::shape(format!(
                "a score set needs at least 2 classes, got {k}"
            )));
        }
        for ((row, col), &v) in scores.indexed_iter() {
            if !v.is_finite() {
                return Err(CoreError::NonFinite {
                    row,
                    col,
                    value: v,
                });
            }
        }
        Ok(ScoreSet { scores })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(CoreError::empty(
                "cannot infer class count from zero rows; use ScoreSet::new",
            ));
        }
        let k = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != k {
                return Err(CoreError::shape(format!(
                    "row {i} has {} entries, expected {k}",
                    r.len()
                )));
            }
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let arr = Array2::from_shape_vec((rows.len(), k), flat)
            .map_err(|e| CoreError::shape(e.to_string()))?;
        ScoreSet::new(arr)
    }

    pub fn row_count(&self) -> usize {
        self.scores.nrows()
    }

    pub fn class_count(&self) -> usize {
        self.scores.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.scores.row(i)
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.scores
    }

    pub fn into_array(self) -> Array2<f64> {
        self.scores
    }

    /// Every score multiplied by `factor`. Used to construct deliberately
    /// miscalibrated variants of a calibrated set.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !factor.is_finite() {
            return Err(CoreError::param(format!("scale factor {factor} is not finite")));
        }
        ScoreSet::new(self.scores.mapv(|v| v * factor))
    }
}

/// Scores plus one ground-truth label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScores {
    pub scores: ScoreSet,
    pub labels: Vec<usize>,
}

impl LabeledScores {
    pub fn new(scores: ScoreSet, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != scores.row_count() {
            return Err(CoreError::shape(format!(
                "{} labels for {} rows",
                labels.len(),
                scores.row_count()
            )));
        }
        let k = scores.class_count();
        for (row, &label) in labels.iter().enumerate() {
            if label >= k {
                return Err(CoreError::LabelOutOfRange {
                    row,
                    label,
                    class_count: k,
                });
            }
        }
        Ok(LabeledScores { scores, labels })
    }

    pub fn row_count(&self) -> usize {
        self.scores.row_count()
    }

    pub fn class_count(&self) -> usize {
        self.scores.class_count()
    }
}

/// Log class marginals `m` with `exp(m)` a probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMarginals {
    log_probs: Vec<f64>,
}

impl ClassMarginals {
    pub fn uniform(class_count: usize) -> Result<Self> {
        if class_count < 2 {
            return Err(CoreError::param(format!(
                "marginals need at least 2 classes, got {class_count}"
            )));
        }
        let lp = -(class_count as f64).ln();
        Ok(ClassMarginals {
            log_probs: vec![lp; class_count],
        })
    }

    pub fn from_probs(probs: &[f64]) -> Result<Self> {
        if probs.len() < 2 {
            return Err(CoreError::param(format!(
                "marginals need at least 2 classes, got {}",
                probs.len()
            )));
        }
        let mut sum = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p <= 0.0 || p > 1.0 {
                return Err(CoreError::param(format!(
                    "marginal probability {p} for class {i} is outside (0, 1]"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > MARGINAL_SUM_TOL {
            return Err(CoreError::param(format!(
                "marginal probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(ClassMarginals {
            log_probs: probs.iter().map(|p| p.ln()).collect(),
        })
    }

    /// Add-one smoothed estimate from labels: `(count_y + 1) / (n + k)`.
    /// Smoothing keeps every class strictly positive even when a class is
    /// absent from a small validation split.
    pub fn from_labels_smoothed(labels: &[usize], class_count: usize) -> Result<Self> {
        if class_count < 2 {
            return Err(CoreError::param(format!(
                "marginals need at least 2 classes, got {class_count}"
            )));
        }
        let mut counts = vec![0usize; class_count];
        for (row, &label) in labels.iter().enumerate() {
            if label >= class_count {
                return Err(CoreError::LabelOutOfRange {
                    row,
                    label,
                    class_count,
                });
            }
            counts[label] += 1;
        }
        let denom = (labels.len() + class_count) as f64;
        Ok(ClassMarginals {
            log_probs: counts
                .iter()
                .map(|&c| ((c + 1) as f64 / denom).ln())
                .collect(),
        })
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn class_count(&self) -> usize {
        self.log_probs.len()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|lp| lp.exp()).collect()
    }
}

/// `log(sum(exp(xs)))` with max subtraction. Inputs must be finite and
/// non-empty.
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + sum.ln()
}

/// `log(exp(a) + exp(b))`, stable for arguments far below zero. Either
/// argument may be -inf (an exactly absent term).
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Softmax of one row.
pub(crate) fn softmax_slice(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = xs.iter().map(|&x| (x - m).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// Log-softmax of one row: `xs - log_sum_exp(xs)`.
pub(crate) fn log_softmax_slice(xs: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(xs);
    xs.iter().map(|&x| x - lse).collect()
}

/// Index of the row maximum; ties resolve to the smallest index.
pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate().skip(1) {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

/// Row-wise softmax. Each output row sums to one within [`ROW_SUM_TOL`].
pub fn softmax_rows(s: &ScoreSet) -> Array2<f64> {
    let mut out = Array2::zeros((s.row_count(), s.class_count()));
    for (i, row) in s.as_array().rows().into_iter().enumerate() {
        let sm = softmax_slice(row.as_slice().expect("row-major scores"));
        for (j, v) in sm.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    out
}

/// Argmax prediction per row, ties to the smallest class index.
pub fn predict(s: &ScoreSet) -> Vec<usize> {
    s.as_array()
        .rows()
        .into_iter()
        .map(|row| argmax(row.as_slice().expect("row-major scores")))
        .collect()
}

/// Fraction of predictions that differ from the labels.
pub fn error_rate_of(preds: &[usize], labels: &[usize]) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(CoreError::misaligned(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if preds.is_empty() {
        return Err(CoreError::empty("error rate of zero rows is undefined"));
    }
    let wrong = preds.iter().zip(labels).filter(|(p, l)| p != l).count();
    Ok(wrong as f64 / preds.len() as f64)
}

/// `1 - error_rate_of(..)`, so the two always sum to exactly one.
pub fn accuracy_of(preds: &[usize], labels: &[usize]) -> Result<f64> {
    Ok(1.0 - error_rate_of(preds, labels)?)
}

/// Fraction of rows whose argmax prediction differs from the label.
pub fn error_rate(d: &LabeledScores) -> Result<f64> {
    error_rate_of(&predict(&d.scores), &d.labels)
}

/// `1 - error_rate(d)`, so the two always sum to exactly one.
pub fn accuracy(d: &LabeledScores) -> Result<f64> {
    Ok(1.0 - error_rate(d)?)
}
