//! Confidence-matching temperature scaling and reliability reporting.
//!
//! A model's average confidence is the mean over examples of its top
//! softmax probability. Dividing scores by a temperature `t > 1` flattens
//! the softmax and lowers confidence; `t < 1` sharpens it. Because average
//! confidence is strictly decreasing in `t` (for any set with at least one
//! non-constant row), there is a unique temperature whose confidence equals
//! any achievable target, and bisection finds it.
//!
//! The fit target is the model's own validation accuracy: a model whose
//! confidence matches its accuracy is calibrated on average. This is the
//! whole calibration step; there is no gradient-based NLL minimization and
//! no per-class (vector) scaling here.

use crate::error::{CoreError, Result};
use crate::scores::{self, LabeledScores, ScoreSet};

/// Smallest temperature the fit will consider or accept.
pub const T_MIN: f64 = 1e-3;
/// Largest temperature the fit will consider or accept.
pub const T_MAX: f64 = 1e3;
/// Default tolerance on `|confidence - target|` at the fitted temperature.
pub const DEFAULT_CONFIDENCE_TOL: f64 = 1e-6;
/// Bisection never runs longer than this, so the fit always terminates.
pub const MAX_BISECTION_STEPS: usize = 200;
/// Default number of equal-width reliability bins over (0, 1].
pub const DEFAULT_ECE_BINS: usize = 10;

/// A fitted temperature. `clamped` is set when the requested target was
/// outside what any temperature in `[T_MIN, T_MAX]` can achieve, in which
/// case `t` is the nearest bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureScale {
    pub t: f64,
    pub clamped: bool,
}

impl TemperatureScale {
    pub fn new(t: f64) -> Result<Self> {
        check_temperature(t)?;
        Ok(TemperatureScale { t, clamped: false })
    }

    pub fn identity() -> Self {
        TemperatureScale {
            t: 1.0,
            clamped: false,
        }
    }

    /// Scores divided by the fitted temperature.
    pub fn apply(&self, s: &ScoreSet) -> Result<ScoreSet> {
        s.scaled(1.0 / self.t)
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if !t.is_finite() || !(T_MIN..=T_MAX).contains(&t) {
        return Err(CoreError::param(format!(
            "temperature {t} outside [{T_MIN}, {T_MAX}]"
        )));
    }
    Ok(())
}

/// Mean over rows of the top softmax probability at temperature `t`.
///
/// The per-row maximum probability is computed as
/// `1 / sum_j exp((x_j - x_max) / t)`, so extreme logits stay in range.
pub fn average_confidence(s: &ScoreSet, t: f64) -> Result<f64> {
    check_temperature(t)?;
    if s.row_count() == 0 {
        return Err(CoreError::empty("average confidence of zero rows"));
    }
    let mut total = 0.0;
    for row in s.as_array().rows() {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = row.iter().map(|&x| ((x - m) / t).exp()).sum();
        total += 1.0 / denom;
    }
    Ok(total / s.row_count() as f64)
}

/// Finds `t` with `|average_confidence(s, t) - target| <= tol` by bisection
/// over `[T_MIN, T_MAX]`.
///
/// Targets outside `[1/k, 1)` are unachievable (the top probability of a
/// `k`-class softmax always lies in that range), so the fit returns the
/// nearest bound with `clamped` set: `T_MIN` for targets at or above one,
/// `T_MAX` for targets below `1/k`. The same applies when the target lies
/// inside `[1/k, 1)` but beyond what the bracket reaches for this
/// particular score set.
pub fn fit_temperature_to_target(s: &ScoreSet, target: f64, tol: f64) -> Result<TemperatureScale> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(CoreError::param(format!("tolerance {tol} must be positive")));
    }
    if !target.is_finite() || !(0.0..=1.0).contains(&target) {
        return Err(CoreError::param(format!(
            "confidence target {target} outside [0, 1]"
        )));
    }
    if s.row_count() == 0 {
        return Err(CoreError::empty("temperature fit on zero rows"));
    }
    let k = s.class_count() as f64;
    if target >= 1.0 {
        return Ok(TemperatureScale {
            t: T_MIN,
            clamped: true,
        });
    }
    if target < 1.0 / k {
        return Ok(TemperatureScale {
            t: T_MAX,
            clamped: true,
        });
    }

    // Confidence is decreasing in t: the low end of the bracket gives the
    // highest confidence this score set can reach.
    let conf_lo = average_confidence(s, T_MIN)?;
    if (conf_lo - target).abs() <= tol {
        return Ok(TemperatureScale {
            t: T_MIN,
            clamped: false,
        });
    }
    if conf_lo < target {
        return Ok(TemperatureScale {
            t: T_MIN,
            clamped: true,
        });
    }
    let conf_hi = average_confidence(s, T_MAX)?;
    if (conf_hi - target).abs() <= tol {
        return Ok(TemperatureScale {
            t: T_MAX,
            clamped: false,
        });
    }
    if conf_hi > target {
        return Ok(TemperatureScale {
            t: T_MAX,
            clamped: true,
        });
    }

    let (mut lo, mut hi) = (T_MIN, T_MAX);
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..MAX_BISECTION_STEPS {
        mid = 0.5 * (lo + hi);
        let conf = average_confidence(s, mid)?;
        if (conf - target).abs() <= tol {
            return Ok(TemperatureScale {
                t: mid,
                clamped: false,
            });
        }
        if conf > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Unreachable for continuous strictly-monotone confidence; flagged so a
    // caller never mistakes the result for a converged fit.
    Ok(TemperatureScale {
        t: mid,
        clamped: true,
    })
}

/// Fits the temperature whose average confidence matches the set's own
/// accuracy.
pub fn fit_temperature(d: &LabeledScores, tol: f64) -> Result<TemperatureScale> {
    let target = scores::accuracy(d)?;
    fit_temperature_to_target(&d.scores, target, tol)
}

/// Reliability diagram over equal-width confidence bins on (0, 1], with
/// bins right-inclusive: bin `b` covers `(edges[b], edges[b+1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityReport {
    pub bin_edges: Vec<f64>,
    pub bin_counts: Vec<usize>,
    /// Mean top-probability per bin; 0 for empty bins.
    pub bin_confidences: Vec<f64>,
    /// Fraction correct per bin; 0 for empty bins.
    pub bin_accuracies: Vec<f64>,
    pub ece: f64,
    pub mean_confidence: f64,
}

impl ReliabilityReport {
    /// The expected calibration error as defined by this report's own bins:
    /// count-weighted mean absolute confidence/accuracy gap.
    pub fn recompute_ece(&self) -> f64 {
        let n: usize = self.bin_counts.iter().sum();
        if n == 0 {
            return 0.0;
        }
        let mut total = 0.0;
        for b in 0..self.bin_counts.len() {
            if self.bin_counts[b] == 0 {
                continue;
            }
            let w = self.bin_counts[b] as f64 / n as f64;
            total += w * (self.bin_accuracies[b] - self.bin_confidences[b]).abs();
        }
        total
    }
}

/// Expected calibration error of `d` at temperature `t` over `num_bins`
/// equal-width bins.
pub fn ece(d: &LabeledScores, t: f64, num_bins: usize) -> Result<ReliabilityReport> {
    check_temperature(t)?;
    if num_bins == 0 {
        return Err(CoreError::param("ece needs at least one bin"));
    }
    if d.row_count() == 0 {
        return Err(CoreError::empty("ece of zero rows"));
    }

    let n = d.row_count();
    let b = num_bins as f64;
    let mut counts = vec![0usize; num_bins];
    let mut conf_sums = vec![0.0f64; num_bins];
    let mut correct = vec![0usize; num_bins];
    let mut conf_total = 0.0;

    for (i, row) in d.scores.as_array().rows().into_iter().enumerate() {
        let xs: Vec<f64> = row.iter().map(|&x| x / t).collect();
        let sm = scores::softmax_slice(&xs);
        let pred = scores::argmax(&sm);
        let conf = sm[pred];
        // Right-inclusive equal-width bins: confidence c lands in the
        // smallest bin whose upper edge is >= c. Top probabilities are
        // always positive, so ceil(c*b) >= 1.
        let idx = ((conf * b).ceil() as usize).clamp(1, num_bins) - 1;
        counts[idx] += 1;
        conf_sums[idx] += conf;
        if pred == d.labels[i] {
            correct[idx] += 1;
        }
        conf_total += conf;
    }

    let bin_edges: Vec<f64> = (0..=num_bins).map(|i| i as f64 / b).collect();
    let mut bin_confidences = vec![0.0; num_bins];
    let mut bin_accuracies = vec![0.0; num_bins];
    let mut ece = 0.0;
    for i in 0..num_bins {
        if counts[i] == 0 {
            continue;
        }
        bin_confidences[i] = conf_sums[i] / counts[i] as f64;
        bin_accuracies[i] = correct[i] as f64 / counts[i] as f64;
        ece += (counts[i] as f64 / n as f64) * (bin_accuracies[i] - bin_confidences[i]).abs();
    }

    Ok(ReliabilityReport {
        bin_edges,
        bin_counts: counts,
        bin_confidences,
        bin_accuracies,
        ece,
        mean_confidence: conf_total / n as f64,
    })
}
