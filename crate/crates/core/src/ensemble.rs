//! Combining two aligned score sets into one.
//!
//! Strategies come in three families:
//! - raw: add the score rows (`Logits`) or average the softmax
//!   probabilities (`Probs`, kept in log space);
//! - tuned: a convex blend with weight `alpha` picked on ID validation
//!   accuracy over the fixed grid {0.0, 0.1, ..., 1.0}, applied to raw
//!   scores (`TunedLogits`, `TunedProbs`);
//! - calibrated: each model's scores are first divided by its
//!   confidence-matching temperature (`CalibratedLogits`,
//!   `CalibratedProbs`, and `CalibratedLogitsMarginal`, which additionally
//!   subtracts log class marginals so that the sum approximates a joint
//!   log posterior under class imbalance).
//!
//! `CalibratedProbs` is the default strategy: averaging calibrated
//! probabilities is slightly more forgiving of residual miscalibration
//! than adding calibrated logits.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;

use crate::calibration::{self, TemperatureScale};
use crate::error::{CoreError, Result};
use crate::scores::{self, ClassMarginals, LabeledScores, ScoreSet};

/// Number of steps in the tuning grid; the grid is `{i/10 : i = 0..=10}`.
pub const ALPHA_GRID_STEPS: usize = 10;

/// The tuning grid in ascending order.
pub fn alpha_grid() -> Vec<f64> {
    (0..=ALPHA_GRID_STEPS)
        .map(|i| i as f64 / ALPHA_GRID_STEPS as f64)
        .collect()
}

fn on_alpha_grid(alpha: f64) -> bool {
    if !(0.0..=1.0).contains(&alpha) {
        return false;
    }
    let scaled = alpha * ALPHA_GRID_STEPS as f64;
    (scaled - scaled.round()).abs() <= 1e-9
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnsembleStrategy {
    /// Sum of raw score rows.
    Logits,
    /// Log of the summed softmax probabilities of raw rows.
    Probs,
    /// `alpha * std + (1 - alpha) * rob` on raw rows.
    TunedLogits,
    /// Log of `alpha * softmax(std) + (1 - alpha) * softmax(rob)`.
    TunedProbs,
    /// Sum of temperature-scaled rows.
    CalibratedLogits,
    /// Log of the summed softmax probabilities of temperature-scaled rows.
    CalibratedProbs,
    /// Temperature-scaled sum minus log class marginals.
    CalibratedLogitsMarginal,
}

impl EnsembleStrategy {
    pub const ALL: [EnsembleStrategy; 7] = [
        EnsembleStrategy::Logits,
        EnsembleStrategy::Probs,
        EnsembleStrategy::TunedLogits,
        EnsembleStrategy::TunedProbs,
        EnsembleStrategy::CalibratedLogits,
        EnsembleStrategy::CalibratedProbs,
        EnsembleStrategy::CalibratedLogitsMarginal,
    ];

    pub fn is_tuned(self) -> bool {
        matches!(
            self,
            EnsembleStrategy::TunedLogits | EnsembleStrategy::TunedProbs
        )
    }

    pub fn is_calibrated(self) -> bool {
        matches!(
            self,
            EnsembleStrategy::CalibratedLogits
                | EnsembleStrategy::CalibratedProbs
                | EnsembleStrategy::CalibratedLogitsMarginal
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            EnsembleStrategy::Logits => "logits",
            EnsembleStrategy::Probs => "probs",
            EnsembleStrategy::TunedLogits => "tuned-logits",
            EnsembleStrategy::TunedProbs => "tuned-probs",
            EnsembleStrategy::CalibratedLogits => "calibrated-logits",
            EnsembleStrategy::CalibratedProbs => "calibrated-probs",
            EnsembleStrategy::CalibratedLogitsMarginal => "calibrated-logits-marginal",
        }
    }
}

impl fmt::Display for EnsembleStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnsembleStrategy {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        EnsembleStrategy::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| CoreError::param(format!("unknown ensemble strategy `{s}`")))
    }
}

/// Everything needed to apply a strategy to new score pairs.
///
/// Temperatures are fixed at 1 and `alpha` at 0.5 where the strategy does
/// not use them; `marginals` is present only for the marginal variant.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub strategy: EnsembleStrategy,
    pub t_std: TemperatureScale,
    pub t_rob: TemperatureScale,
    pub alpha: f64,
    pub marginals: Option<ClassMarginals>,
}

impl EnsembleConfig {
    pub fn plain(strategy: EnsembleStrategy) -> Result<Self> {
        if strategy.is_tuned() || strategy.is_calibrated() {
            return Err(CoreError::param(format!(
                "strategy {strategy} needs fitted parameters; use tuned() or calibrated()"
            )));
        }
        Ok(EnsembleConfig {
            strategy,
            t_std: TemperatureScale::identity(),
            t_rob: TemperatureScale::identity(),
            alpha: 0.5,
            marginals: None,
        })
    }

    pub fn tuned(strategy: EnsembleStrategy, alpha: f64) -> Result<Self> {
        if !strategy.is_tuned() {
            return Err(CoreError::param(format!(
                "strategy {strategy} does not take a tuning weight"
            )));
        }
        if !on_alpha_grid(alpha) {
            return Err(CoreError::param(format!(
                "alpha {alpha} is not on the tuning grid"
            )));
        }
        Ok(EnsembleConfig {
            strategy,
            t_std: TemperatureScale::identity(),
            t_rob: TemperatureScale::identity(),
            alpha,
            marginals: None,
        })
    }

    pub fn calibrated(
        strategy: EnsembleStrategy,
        t_std: TemperatureScale,
        t_rob: TemperatureScale,
    ) -> Result<Self> {
        match strategy {
            EnsembleStrategy::CalibratedLogits | EnsembleStrategy::CalibratedProbs => {
                Ok(EnsembleConfig {
                    strategy,
                    t_std,
                    t_rob,
                    alpha: 0.5,
                    marginals: None,
                })
            }
            _ => Err(CoreError::param(format!(
                "strategy {strategy} is not a temperature-only calibrated variant"
            ))),
        }
    }

    pub fn calibrated_marginal(
        t_std: TemperatureScale,
        t_rob: TemperatureScale,
        marginals: ClassMarginals,
    ) -> Self {
        EnsembleConfig {
            strategy: EnsembleStrategy::CalibratedLogitsMarginal,
            t_std,
            t_rob,
            alpha: 0.5,
            marginals: Some(marginals),
        }
    }

    fn validate(&self, class_count: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) || !self.alpha.is_finite() {
            return Err(CoreError::param(format!(
                "alpha {} outside [0, 1]",
                self.alpha
            )));
        }
        if self.strategy.is_tuned() && !on_alpha_grid(self.alpha) {
            return Err(CoreError::param(format!(
                "alpha {} is not on the tuning grid",
                self.alpha
            )));
        }
        if !self.strategy.is_calibrated() && (self.t_std.t != 1.0 || self.t_rob.t != 1.0) {
            return Err(CoreError::param(format!(
                "strategy {} must keep unit temperatures",
                self.strategy
            )));
        }
        match (self.strategy, &self.marginals) {
            (EnsembleStrategy::CalibratedLogitsMarginal, Some(m)) => {
                if m.class_count() != class_count {
                    return Err(CoreError::shape(format!(
                        "marginals cover {} classes, scores have {}",
                        m.class_count(),
                        class_count
                    )));
                }
            }
            (EnsembleStrategy::CalibratedLogitsMarginal, None) => {
                return Err(CoreError::param(
                    "calibrated-logits-marginal needs class marginals",
                ));
            }
            _ => {}
        }
        Ok(())
    }
}

fn check_aligned(std: &ScoreSet, rob: &ScoreSet) -> Result<()> {
    if std.row_count() != rob.row_count() || std.class_count() != rob.class_count() {
        return Err(CoreError::misaligned(format!(
            "standard scores are {}x{}, robust scores are {}x{}",
            std.row_count(),
            std.class_count(),
            rob.row_count(),
            rob.class_count()
        )));
    }
    Ok(())
}

/// Combines aligned standard and robust scores per the configured strategy.
///
/// Probability-space strategies stay in log space throughout
/// (`log(a_prob + b_prob)` is computed with log-add-exp on log-softmax
/// rows), so the output is always a valid finite `ScoreSet` even when one
/// model's probability underflows.
pub fn combine(std: &ScoreSet, rob: &ScoreSet, cfg: &EnsembleConfig) -> Result<ScoreSet> {
    check_aligned(std, rob)?;
    cfg.validate(std.class_count())?;

    let (n, k) = (std.row_count(), std.class_count());
    let mut out = Array2::zeros((n, k));
    let s_arr = std.as_array();
    let r_arr = rob.as_array();

    // Weights for the probability-space blends in log space; ln(0) = -inf
    // drops the corresponding term exactly at the grid endpoints.
    let (log_ws, log_wr) = match cfg.strategy {
        EnsembleStrategy::TunedProbs => (cfg.alpha.ln(), (1.0 - cfg.alpha).ln()),
        _ => (0.0, 0.0),
    };

    for i in 0..n {
        let s_row = s_arr.row(i);
        let s_row = s_row.as_slice().expect("row-major scores");
        let r_row = r_arr.row(i);
        let r_row = r_row.as_slice().expect("row-major scores");
        match cfg.strategy {
            EnsembleStrategy::Logits => {
                for j in 0..k {
                    out[(i, j)] = s_row[j] + r_row[j];
                }
            }
            EnsembleStrategy::TunedLogits => {
                for j in 0..k {
                    out[(i, j)] = cfg.alpha * s_row[j] + (1.0 - cfg.alpha) * r_row[j];
                }
            }
            EnsembleStrategy::CalibratedLogits => {
                for j in 0..k {
                    out[(i, j)] = s_row[j] / cfg.t_std.t + r_row[j] / cfg.t_rob.t;
                }
            }
            EnsembleStrategy::CalibratedLogitsMarginal => {
                let m = cfg.marginals.as_ref().expect("validated above").log_probs();
                for j in 0..k {
                    out[(i, j)] = s_row[j] / cfg.t_std.t + r_row[j] / cfg.t_rob.t - m[j];
                }
            }
            EnsembleStrategy::Probs | EnsembleStrategy::TunedProbs => {
                let ls = scores::log_softmax_slice(s_row);
                let lr = scores::log_softmax_slice(r_row);
                for j in 0..k {
                    out[(i, j)] = scores::log_add_exp(log_ws + ls[j], log_wr + lr[j]);
                }
            }
            EnsembleStrategy::CalibratedProbs => {
                let ss: Vec<f64> = s_row.iter().map(|&x| x / cfg.t_std.t).collect();
                let rs: Vec<f64> = r_row.iter().map(|&x| x / cfg.t_rob.t).collect();
                let ls = scores::log_softmax_slice(&ss);
                let lr = scores::log_softmax_slice(&rs);
                for j in 0..k {
                    out[(i, j)] = scores::log_add_exp(ls[j], lr[j]);
                }
            }
        }
    }
    ScoreSet::new(out)
}

/// Picks the grid weight with the best validation accuracy; ties go to the
/// smallest weight, so identical models tune to 0.0.
pub fn tune_weight(
    std_val: &LabeledScores,
    rob_val: &LabeledScores,
    strategy: EnsembleStrategy,
) -> Result<f64> {
    if !strategy.is_tuned() {
        return Err(CoreError::param(format!(
            "tune_weight applies to tuned strategies, not {strategy}"
        )));
    }
    check_val_pair(std_val, rob_val)?;

    let mut best_alpha = 0.0;
    let mut best_acc = f64::NEG_INFINITY;
    for alpha in alpha_grid() {
        let cfg = EnsembleConfig::tuned(strategy, alpha)?;
        let ens = combine(&std_val.scores, &rob_val.scores, &cfg)?;
        let acc = scores::accuracy(&LabeledScores::new(ens, std_val.labels.clone())?)?;
        if acc > best_acc {
            best_acc = acc;
            best_alpha = alpha;
        }
    }
    Ok(best_alpha)
}

fn check_val_pair(std_val: &LabeledScores, rob_val: &LabeledScores) -> Result<()> {
    check_aligned(&std_val.scores, &rob_val.scores)?;
    if std_val.labels != rob_val.labels {
        return Err(CoreError::misaligned(
            "validation labels differ between the standard and robust sets",
        ));
    }
    if std_val.row_count() == 0 {
        return Err(CoreError::empty("validation sets have no rows"));
    }
    Ok(())
}

/// A fitted ensemble plus fit diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleFit {
    pub config: EnsembleConfig,
    /// Set when the validation split has fewer rows than classes; the
    /// temperatures and marginals are then coarse but still usable.
    pub few_validation_rows: bool,
}

/// Fits temperatures (and marginals, for the marginal variant) on aligned
/// ID validation splits and returns a ready-to-apply config.
pub fn build_calibrated_ensemble(
    std_val: &LabeledScores,
    rob_val: &LabeledScores,
    strategy: EnsembleStrategy,
) -> Result<EnsembleFit> {
    build_calibrated_ensemble_with(
        std_val,
        rob_val,
        strategy,
        calibration::DEFAULT_CONFIDENCE_TOL,
    )
}

pub fn build_calibrated_ensemble_with(
    std_val: &LabeledScores,
    rob_val: &LabeledScores,
    strategy: EnsembleStrategy,
    tol: f64,
) -> Result<EnsembleFit> {
    if !strategy.is_calibrated() {
        return Err(CoreError::param(format!(
            "build_calibrated_ensemble applies to calibrated strategies, not {strategy}"
        )));
    }
    check_val_pair(std_val, rob_val)?;

    let t_std = calibration::fit_temperature(std_val, tol)?;
    let t_rob = calibration::fit_temperature(rob_val, tol)?;
    let config = match strategy {
        EnsembleStrategy::CalibratedLogitsMarginal => {
            let marginals = ClassMarginals::from_labels_smoothed(
                &std_val.labels,
                std_val.class_count(),
            )?;
            EnsembleConfig::calibrated_marginal(t_std, t_rob, marginals)
        }
        _ => EnsembleConfig::calibrated(strategy, t_std, t_rob)?,
    };
    Ok(EnsembleFit {
        config,
        few_validation_rows: std_val.row_count() < std_val.class_count(),
    })
}

/// Fits whatever the strategy needs: nothing for the raw strategies, a grid
/// weight for the tuned ones, temperatures for the calibrated ones.
pub fn fit_strategy(
    std_val: &LabeledScores,
    rob_val: &LabeledScores,
    strategy: EnsembleStrategy,
    tol: f64,
) -> Result<EnsembleFit> {
    if strategy.is_calibrated() {
        return build_calibrated_ensemble_with(std_val, rob_val, strategy, tol);
    }
    if strategy.is_tuned() {
        let alpha = tune_weight(std_val, rob_val, strategy)?;
        return Ok(EnsembleFit {
            config: EnsembleConfig::tuned(strategy, alpha)?,
            few_validation_rows: std_val.row_count() < std_val.class_count(),
        });
    }
    check_val_pair(std_val, rob_val)?;
    Ok(EnsembleFit {
        config: EnsembleConfig::plain(strategy)?,
        few_validation_rows: std_val.row_count() < std_val.class_count(),
    })
}

/// What happens to a raw logit ensemble when one model's scores are
/// inflated by a constant factor.
#[derive(Debug, Clone, PartialEq)]
pub struct MscaleReport {
    pub m_factor: f64,
    pub row_count: usize,
    /// Fraction of rows where `argmax(m*std + rob)` equals the standard
    /// model's own prediction.
    pub agreement_fraction: f64,
    /// Once `m_factor` exceeds this value the inflated model dictates every
    /// prediction; infinite when a tied standard row can never dominate.
    pub dominance_threshold: f64,
    /// Agreement rate per representative factor, for reporting.
    pub sweep: BTreeMap<String, f64>,
}

/// Demonstrates how score inflation lets one model swamp a raw logit
/// ensemble.
///
/// For each row with standard prediction `j*`, the ensemble keeps `j*`
/// whenever `m * (s[j*] - s[j]) > r[j] - r[j*]` for every other class `j`,
/// so the largest ratio `(r[j] - r[j*]) / (s[j*] - s[j])` over rows and
/// classes is the finite takeover threshold.
pub fn mscale_demo(std: &ScoreSet, rob: &ScoreSet, m_factor: f64) -> Result<MscaleReport> {
    if !m_factor.is_finite() || m_factor < 1.0 {
        return Err(CoreError::param(format!(
            "m_factor {m_factor} must be a finite value >= 1"
        )));
    }
    check_aligned(std, rob)?;
    if std.row_count() == 0 {
        return Err(CoreError::empty("mscale demo needs at least one row"));
    }

    let pred_std = scores::predict(std);
    let mut threshold = 0.0f64;
    for (i, &j_star) in pred_std.iter().enumerate() {
        let s_row = std.row(i);
        let r_row = rob.row(i);
        for j in 0..std.class_count() {
            if j == j_star {
                continue;
            }
            let gap_s = s_row[j_star] - s_row[j];
            let gap_r = r_row[j] - r_row[j_star];
            if gap_s > 0.0 {
                threshold = threshold.max(gap_r / gap_s);
            } else if gap_r > 0.0 {
                // Tied standard scores with the robust model favoring the
                // other class: no finite factor restores dominance.
                threshold = f64::INFINITY;
            }
        }
    }

    let agreement = |m: f64| -> Result<f64> {
        let inflated = std.scaled(m)?;
        let combined = combine(
            &inflated,
            rob,
            &EnsembleConfig::plain(EnsembleStrategy::Logits)?,
        )?;
        let pred_ens = scores::predict(&combined);
        let agree = pred_ens
            .iter()
            .zip(&pred_std)
            .filter(|(a, b)| a == b)
            .count();
        Ok(agree as f64 / std.row_count() as f64)
    };

    let mut sweep = BTreeMap::new();
    for m in [1.0, 10.0, 100.0, m_factor] {
        if m <= m_factor {
            sweep.insert(format!("{m}"), agreement(m)?);
        }
    }

    Ok(MscaleReport {
        m_factor,
        row_count: std.row_count(),
        agreement_fraction: agreement(m_factor)?,
        dominance_threshold: threshold,
        sweep,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: &[Vec<f64>]) -> ScoreSet {
        ScoreSet::from_rows(rows).unwrap()
    }

    fn probs_of(s: &ScoreSet) -> Vec<Vec<f64>> {
        scores::softmax_rows(s)
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect()
    }

    #[test]
    fn probs_strategy_averages_probabilities() {
        let std = set(&[vec![0.9f64.ln(), 0.1f64.ln()]]);
        let rob = set(&[vec![0.2f64.ln(), 0.8f64.ln()]]);
        let cfg = EnsembleConfig::plain(EnsembleStrategy::Probs).unwrap();
        let ens = combine(&std, &rob, &cfg).unwrap();
        let p = probs_of(&ens);
        assert!((p[0][0] - 0.55).abs() < 1e-12);
        assert!((p[0][1] - 0.45).abs() < 1e-12);
        assert_eq!(scores::predict(&ens), vec![0]);
    }

    #[test]
    fn logits_strategy_multiplies_probabilities() {
        let std = set(&[vec![0.9f64.ln(), 0.1f64.ln()]]);
        let rob = set(&[vec![0.2f64.ln(), 0.8f64.ln()]]);
        let cfg = EnsembleConfig::plain(EnsembleStrategy::Logits).unwrap();
        let ens = combine(&std, &rob, &cfg).unwrap();
        let p = probs_of(&ens);
        // Product of probabilities, renormalized: [0.18, 0.08] / 0.26.
        assert!((p[0][0] - 0.18 / 0.26).abs() < 1e-12);
        assert!((p[0][1] - 0.08 / 0.26).abs() < 1e-12);
        assert_eq!(scores::predict(&ens), vec![0]);
    }

    #[test]
    fn probability_strategies_survive_extreme_logits() {
        let std = set(&[vec![1000.0, 0.0]]);
        let rob = set(&[vec![0.0, 900.0]]);
        let cfg = EnsembleConfig::plain(EnsembleStrategy::Probs).unwrap();
        let ens = combine(&std, &rob, &cfg).unwrap();
        assert!(ens.as_array().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn calibrated_probs_at_unit_temperature_equals_probs_exactly() {
        let std = set(&[vec![1.2, -0.3, 0.4], vec![0.0, 0.5, -2.0]]);
        let rob = set(&[vec![-0.2, 0.9, 0.1], vec![1.0, -1.0, 0.0]]);
        let plain = combine(
            &std,
            &rob,
            &EnsembleConfig::plain(EnsembleStrategy::Probs).unwrap(),
        )
        .unwrap();
        let calibrated = combine(
            &std,
            &rob,
            &EnsembleConfig::calibrated(
                EnsembleStrategy::CalibratedProbs,
                TemperatureScale::identity(),
                TemperatureScale::identity(),
            )
            .unwrap(),
        )
        .unwrap();
        assert_eq!(plain.as_array(), calibrated.as_array());
    }

    #[test]
    fn combining_is_commutative_in_the_two_models() {
        let a = set(&[vec![1.2, -0.3], vec![0.0, 0.5]]);
        let b = set(&[vec![-0.2, 0.9], vec![1.0, -1.0]]);
        for strategy in [EnsembleStrategy::Logits, EnsembleStrategy::Probs] {
            let cfg = EnsembleConfig::plain(strategy).unwrap();
            let ab = combine(&a, &b, &cfg).unwrap();
            let ba = combine(&b, &a, &cfg).unwrap();
            assert_eq!(ab.as_array(), ba.as_array(), "{strategy}");
        }
    }

    #[test]
    fn tuned_logits_endpoints_reproduce_the_inputs_exactly() {
        let std = set(&[vec![1.2, -0.3], vec![0.0, 0.5]]);
        let rob = set(&[vec![-0.2, 0.9], vec![1.0, -1.0]]);
        let at_one = combine(
            &std,
            &rob,
            &EnsembleConfig::tuned(EnsembleStrategy::TunedLogits, 1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(at_one.as_array(), std.as_array());
        let at_zero = combine(
            &std,
            &rob,
            &EnsembleConfig::tuned(EnsembleStrategy::TunedLogits, 0.0).unwrap(),
        )
        .unwrap();
        assert_eq!(at_zero.as_array(), rob.as_array());
    }

    #[test]
    fn tuned_probs_endpoints_reproduce_input_predictions() {
        let std = set(&[vec![1.2, -0.3], vec![0.0, 0.5]]);
        let rob = set(&[vec![-0.2, 0.9], vec![1.0, -1.0]]);
        let at_one = combine(
            &std,
            &rob,
            &EnsembleConfig::tuned(EnsembleStrategy::TunedProbs, 1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(scores::predict(&at_one), scores::predict(&std));
        let at_zero = combine(
            &std,
            &rob,
            &EnsembleConfig::tuned(EnsembleStrategy::TunedProbs, 0.0).unwrap(),
        )
        .unwrap();
        assert_eq!(scores::predict(&at_zero), scores::predict(&rob));
    }

    #[test]
    fn half_weight_tuned_logits_predicts_like_plain_logits() {
        let std = set(&[vec![1.25, -0.5, 0.75], vec![0.0, 2.0, -1.0]]);
        let rob = set(&[vec![-0.25, 1.5, 0.5], vec![0.5, -0.5, 1.0]]);
        let tuned = combine(
            &std,
            &rob,
            &EnsembleConfig::tuned(EnsembleStrategy::TunedLogits, 0.5).unwrap(),
        )
        .unwrap();
        let plain = combine(
            &std,
            &rob,
            &EnsembleConfig::plain(EnsembleStrategy::Logits).unwrap(),
        )
        .unwrap();
        assert_eq!(scores::predict(&tuned), scores::predict(&plain));
    }

    #[test]
    fn uniform_marginals_match_calibrated_logits_predictions() {
        let std = set(&[vec![1.25, -0.5], vec![0.0, 2.0], vec![3.0, 1.0]]);
        let rob = set(&[vec![-0.25, 1.5], vec![0.5, -0.5], vec![0.0, 0.5]]);
        let t_std = TemperatureScale::new(1.7).unwrap();
        let t_rob = TemperatureScale::new(0.8).unwrap();
        let with_m = combine(
            &std,
            &rob,
            &EnsembleConfig::calibrated_marginal(
                t_std,
                t_rob,
                ClassMarginals::uniform(2).unwrap(),
            ),
        )
        .unwrap();
        let without = combine(
            &std,
            &rob,
            &EnsembleConfig::calibrated(EnsembleStrategy::CalibratedLogits, t_std, t_rob)
                .unwrap(),
        )
        .unwrap();
        assert_eq!(scores::predict(&with_m), scores::predict(&without));
    }

    #[test]
    fn tune_weight_prefers_the_smallest_weight_on_ties() {
        let s = set(&[vec![2.0, 0.0], vec![0.0, 2.0]]);
        let d = LabeledScores::new(s.clone(), vec![0, 1]).unwrap();
        let alpha = tune_weight(&d, &d, EnsembleStrategy::TunedLogits).unwrap();
        assert_eq!(alpha, 0.0);
    }

    #[test]
    fn tune_weight_finds_an_interior_maximizer() {
        // Only an even blend gets all three rows right: one row needs the
        // standard model restrained (wrong above 0.5), another needs the
        // robust model restrained (wrong below 0.5).
        let std = set(&[vec![1.0, 0.0], vec![-2.0, 0.0], vec![2.5, 0.0]]);
        let rob = set(&[vec![1.0, 0.0], vec![2.5, 0.0], vec![-2.0, 0.0]]);
        let labels = vec![0, 0, 0];
        let d_std = LabeledScores::new(std.clone(), labels.clone()).unwrap();
        let d_rob = LabeledScores::new(rob.clone(), labels.clone()).unwrap();
        let alpha = tune_weight(&d_std, &d_rob, EnsembleStrategy::TunedLogits).unwrap();
        assert_eq!(alpha, 0.5);

        // Exhaustive recheck: no grid point beats the returned weight.
        let chosen = EnsembleConfig::tuned(EnsembleStrategy::TunedLogits, alpha).unwrap();
        let chosen_acc = scores::accuracy(
            &LabeledScores::new(combine(&std, &rob, &chosen).unwrap(), labels.clone()).unwrap(),
        )
        .unwrap();
        for a in alpha_grid() {
            let cfg = EnsembleConfig::tuned(EnsembleStrategy::TunedLogits, a).unwrap();
            let acc = scores::accuracy(
                &LabeledScores::new(combine(&std, &rob, &cfg).unwrap(), labels.clone()).unwrap(),
            )
            .unwrap();
            assert!(acc <= chosen_acc);
        }
    }

    #[test]
    fn tune_weight_rejects_misaligned_labels() {
        let s = set(&[vec![2.0, 0.0], vec![0.0, 2.0]]);
        let a = LabeledScores::new(s.clone(), vec![0, 1]).unwrap();
        let b = LabeledScores::new(s, vec![1, 0]).unwrap();
        let err = tune_weight(&a, &b, EnsembleStrategy::TunedLogits).unwrap_err();
        assert!(matches!(err, CoreError::Misaligned { .. }));
    }

    #[test]
    fn build_fits_confidence_matching_temperatures() {
        let rows: Vec<Vec<f64>> = (0..500).map(|_| vec![15.0, 0.0]).collect();
        let labels: Vec<usize> = (0..500).map(|i| if i < 400 { 0 } else { 1 }).collect();
        let std_val = LabeledScores::new(set(&rows), labels.clone()).unwrap();
        let rob_rows: Vec<Vec<f64>> = (0..500).map(|_| vec![1.5, 0.0]).collect();
        let rob_val = LabeledScores::new(set(&rob_rows), labels).unwrap();

        let fit =
            build_calibrated_ensemble(&std_val, &rob_val, EnsembleStrategy::CalibratedProbs)
                .unwrap();
        assert!(!fit.few_validation_rows);
        let conf = calibration::average_confidence(&std_val.scores, fit.config.t_std.t).unwrap();
        assert!((conf - 0.8).abs() <= calibration::DEFAULT_CONFIDENCE_TOL);
        // The standard rows are 10x sharper than they should be for 80%
        // confidence, so the fitted temperature sits near 15/ln(4) ~ 10.8.
        assert!(fit.config.t_std.t > 5.0 && fit.config.t_std.t < 20.0);
    }

    #[test]
    fn build_flags_fewer_rows_than_classes() {
        let std_val = LabeledScores::new(set(&[vec![1.0, 0.0, -1.0]]), vec![0]).unwrap();
        let rob_val = LabeledScores::new(set(&[vec![0.5, 0.0, -0.5]]), vec![0]).unwrap();
        let fit = build_calibrated_ensemble(
            &std_val,
            &rob_val,
            EnsembleStrategy::CalibratedLogitsMarginal,
        )
        .unwrap();
        assert!(fit.few_validation_rows);
        let m = fit.config.marginals.unwrap();
        let p = m.probs();
        // Add-one smoothing over one row of three classes: (1+1)/(1+3).
        assert!((p[0] - 0.5).abs() < 1e-12);
        assert!((p[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in EnsembleStrategy::ALL {
            assert_eq!(s.name().parse::<EnsembleStrategy>().unwrap(), s);
        }
        assert!("softmax-soup".parse::<EnsembleStrategy>().is_err());
    }

    #[test]
    fn alpha_off_grid_is_rejected() {
        assert!(EnsembleConfig::tuned(EnsembleStrategy::TunedLogits, 0.55).is_err());
        assert!(EnsembleConfig::tuned(EnsembleStrategy::TunedLogits, -0.1).is_err());
        assert!(EnsembleConfig::tuned(EnsembleStrategy::TunedLogits, 0.3).is_ok());
    }

    #[test]
    fn mscale_fraction_below_one_when_models_disagree() {
        let std = set(&[vec![1.0, 0.0], vec![2.0, 0.0]]);
        let rob = set(&[vec![0.0, 2.0], vec![0.0, 1.0]]);
        let rep = mscale_demo(&std, &rob, 1.0).unwrap();
        assert_eq!(rep.agreement_fraction, 0.5);
        assert_eq!(rep.dominance_threshold, 2.0);
        let above = mscale_demo(&std, &rob, 3.0).unwrap();
        assert_eq!(above.agreement_fraction, 1.0);
    }

    #[test]
    fn mscale_fraction_is_flat_below_the_threshold() {
        let std = set(&[vec![1.0, 0.0]]);
        let rob = set(&[vec![0.0, 2.0]]);
        let at_one = mscale_demo(&std, &rob, 1.0).unwrap();
        let below = mscale_demo(&std, &rob, 1.5).unwrap();
        assert_eq!(at_one.agreement_fraction, below.agreement_fraction);
        assert_eq!(below.agreement_fraction, 0.0);
        assert_eq!(below.dominance_threshold, 2.0);
    }

    #[test]
    fn mscale_rejects_bad_factors() {
        let s = set(&[vec![1.0, 0.0]]);
        assert!(mscale_demo(&s, &s, 0.5).is_err());
        assert!(mscale_demo(&s, &s, f64::INFINITY).is_err());
    }
}
