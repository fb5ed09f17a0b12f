//! A synthetic world where the ensemble's guarantees hold by construction,
//! and suites that verify them on samples.
//!
//! Each example has a latent feature per model drawn from a class-
//! conditional isotropic Gaussian. A model's score vector is its exact
//! log posterior over classes given its own latent feature (uniform label
//! prior). That construction pins down the two properties the guarantees
//! rest on, with no fitting involved:
//! - calibration: `P(y | scores = s) = softmax(s)_y` exactly, and
//! - conditional independence: the two latents are drawn independently
//!   given the label.
//!
//! Shifted sets reuse the ID score-pair distribution and only resample the
//! label from the shift's conditional, so every sampled row records the
//! exact posterior it was drawn from (`exact_conditionals`). Error
//! comparisons against those posteriors are exact expectations, free of
//! label-sampling noise.
//!
//! Shift variants:
//! - `missing`: the standard model's scores collapse to the zero vector
//!   (its signal is absent); labels follow `softmax(r)`.
//! - `suppressed:tau=T`: both models stay informative but weakened; labels
//!   follow `softmax(T * (s + r))`.
//! - `anticorrelated:alpha=A,beta=B`: the standard model is actively
//!   wrong; labels follow `softmax(A*r - B*s)`.
//! - `mix:w=W,a=(..),b=(..)`: per-row choice of two pure variants.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ensemble::alpha_grid;
use crate::error::{CoreError, Result};
use crate::scores::{self, ClassMarginals, ScoreSet};
use crate::verdict::{CheckResult, VerdictReport};

/// Class-conditional isotropic Gaussian over a model's latent feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianModel {
    /// One row per class: the mean of the latent feature for that class.
    pub locations: Vec<Vec<f64>>,
    /// Shared standard deviation across classes and coordinates.
    pub spread: f64,
}

impl GaussianModel {
    fn validate(&self, class_count: usize) -> Result<()> {
        if self.locations.len() != class_count {
            return Err(CoreError::shape(format!(
                "{} location rows for {} classes",
                self.locations.len(),
                class_count
            )));
        }
        let dim = self.locations[0].len();
        if dim == 0 {
            return Err(CoreError::param("latent features need at least 1 dimension"));
        }
        for (y, row) in self.locations.iter().enumerate() {
            if row.len() != dim {
                return Err(CoreError::shape(format!(
                    "location row {y} has {} coordinates, expected {dim}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(CoreError::param(format!(
                    "non-finite location {v} in class {y}"
                )));
            }
        }
        if !self.spread.is_finite() || self.spread <= 0.0 {
            return Err(CoreError::param(format!(
                "spread {} must be positive",
                self.spread
            )));
        }
        Ok(())
    }

    /// Exact log posterior over classes given latent `u`, uniform prior.
    fn log_posterior(&self, u: &[f64]) -> Vec<f64> {
        let inv = 1.0 / (2.0 * self.spread * self.spread);
        let g: Vec<f64> = self
            .locations
            .iter()
            .map(|mu| {
                let d2: f64 = mu.iter().zip(u).map(|(m, x)| (x - m) * (x - m)).sum();
                -d2 * inv
            })
            .collect();
        scores::log_softmax_slice(&g)
    }
}

/// Full generative description of a two-model world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub class_count: usize,
    pub std_model: GaussianModel,
    pub rob_model: GaussianModel,
    #[serde(default)]
    pub seed: u64,
}

impl WorldSpec {
    pub fn validate(&self) -> Result<()> {
        if self.class_count < 2 {
            return Err(CoreError::param(format!(
                "world needs at least 2 classes, got {}",
                self.class_count
            )));
        }
        self.std_model.validate(self.class_count)?;
        self.rob_model.validate(self.class_count)?;
        Ok(())
    }

    /// A world that looks identical from every class: class `y`'s mean is
    /// `separation * e_y` in a `class_count`-dimensional latent space,
    /// spread 1. Permuting classes permutes coordinates, so all label
    /// statistics are exchangeable.
    pub fn symmetric(class_count: usize, sep_std: f64, sep_rob: f64, seed: u64) -> Result<Self> {
        if class_count < 2 {
            return Err(CoreError::param(format!(
                "world needs at least 2 classes, got {class_count}"
            )));
        }
        let one_hot = |sep: f64| -> Vec<Vec<f64>> {
            (0..class_count)
                .map(|y| {
                    (0..class_count)
                        .map(|j| if j == y { sep } else { 0.0 })
                        .collect()
                })
                .collect()
        };
        let spec = WorldSpec {
            class_count,
            std_model: GaussianModel {
                locations: one_hot(sep_std),
                spread: 1.0,
            },
            rob_model: GaussianModel {
                locations: one_hot(sep_rob),
                spread: 1.0,
            },
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// True when both models' location matrices are square with one
    /// constant on the diagonal and another off it, so every class
    /// permutation is a symmetry of the world.
    pub fn is_label_symmetric(&self) -> bool {
        let symmetric = |m: &GaussianModel| -> bool {
            let k = self.class_count;
            if m.locations.len() != k || m.locations[0].len() != k {
                return false;
            }
            let diag = m.locations[0][0];
            let off = if k > 1 { m.locations[0][1] } else { diag };
            m.locations.iter().enumerate().all(|(y, row)| {
                row.iter()
                    .enumerate()
                    .all(|(j, &v)| v == if j == y { diag } else { off })
            })
        };
        symmetric(&self.std_model) && symmetric(&self.rob_model)
    }
}

/// A distribution shift. `Mixture` components must themselves be pure
/// (nesting depth at most one).
#[derive(Debug, Clone, PartialEq)]
pub enum ShiftSpec {
    MissingSpurious,
    Suppressed {
        tau: f64,
    },
    Anticorrelated {
        alpha: f64,
        beta: f64,
    },
    Mixture {
        weight: f64,
        a: Box<ShiftSpec>,
        b: Box<ShiftSpec>,
    },
}

impl ShiftSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ShiftSpec::MissingSpurious => Ok(()),
            ShiftSpec::Suppressed { tau } => {
                if !tau.is_finite() || *tau <= 0.0 {
                    return Err(CoreError::param(format!("tau {tau} must be positive")));
                }
                Ok(())
            }
            ShiftSpec::Anticorrelated { alpha, beta } => {
                if !alpha.is_finite() || *alpha <= 0.0 {
                    return Err(CoreError::param(format!("alpha {alpha} must be positive")));
                }
                if !beta.is_finite() || *beta <= 0.0 {
                    return Err(CoreError::param(format!("beta {beta} must be positive")));
                }
                Ok(())
            }
            ShiftSpec::Mixture { weight, a, b } => {
                if !weight.is_finite() || !(0.0..=1.0).contains(weight) {
                    return Err(CoreError::param(format!(
                        "mixture weight {weight} outside [0, 1]"
                    )));
                }
                for part in [a.as_ref(), b.as_ref()] {
                    if matches!(part, ShiftSpec::Mixture { .. }) {
                        return Err(CoreError::param(
                            "mixture components must be pure shifts (depth limit 1)",
                        ));
                    }
                    part.validate()?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for ShiftSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShiftSpec::MissingSpurious => write!(f, "missing"),
            ShiftSpec::Suppressed { tau } => write!(f, "suppressed:tau={tau}"),
            ShiftSpec::Anticorrelated { alpha, beta } => {
                write!(f, "anticorrelated:alpha={alpha},beta={beta}")
            }
            ShiftSpec::Mixture { weight, a, b } => write!(f, "mix:w={weight},a=({a}),b=({b})"),
        }
    }
}

fn parse_float(input: &str, whole: &str, what: &str) -> Result<f64> {
    input.parse::<f64>().map_err(|_| CoreError::ShiftParse {
        input: whole.to_string(),
        context: format!("expected a float for {what}, got `{input}`"),
    })
}

impl FromStr for ShiftSpec {
    type Err = CoreError;

    /// Grammar: `missing | suppressed:tau=FLOAT |
    /// anticorrelated:alpha=FLOAT,beta=FLOAT |
    /// mix:w=FLOAT,a=(SPEC),b=(SPEC)`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |context: &str| CoreError::ShiftParse {
            input: s.to_string(),
            context: context.to_string(),
        };
        let trimmed = s.trim();
        if trimmed == "missing" {
            return Ok(ShiftSpec::MissingSpurious);
        }
        if let Some(rest) = trimmed.strip_prefix("suppressed:") {
            let val = rest
                .strip_prefix("tau=")
                .ok_or_else(|| bad("expected `tau=FLOAT`"))?;
            let spec = ShiftSpec::Suppressed {
                tau: parse_float(val, s, "tau")?,
            };
            spec.validate()?;
            return Ok(spec);
        }
        if let Some(rest) = trimmed.strip_prefix("anticorrelated:") {
            let (a_part, b_part) = rest
                .split_once(',')
                .ok_or_else(|| bad("expected `alpha=FLOAT,beta=FLOAT`"))?;
            let a_val = a_part
                .strip_prefix("alpha=")
                .ok_or_else(|| bad("expected `alpha=FLOAT`"))?;
            let b_val = b_part
                .strip_prefix("beta=")
                .ok_or_else(|| bad("expected `beta=FLOAT`"))?;
            let spec = ShiftSpec::Anticorrelated {
                alpha: parse_float(a_val, s, "alpha")?,
                beta: parse_float(b_val, s, "beta")?,
            };
            spec.validate()?;
            return Ok(spec);
        }
        if let Some(rest) = trimmed.strip_prefix("mix:") {
            let rest = rest
                .strip_prefix("w=")
                .ok_or_else(|| bad("expected `w=FLOAT`"))?;
            let (w_str, rest) = rest
                .split_once(",a=(")
                .ok_or_else(|| bad("expected `,a=(SPEC)` after the weight"))?;
            let (a_str, rest) = rest
                .split_once("),b=(")
                .ok_or_else(|| bad("expected `),b=(SPEC)` after the first component"))?;
            let b_str = rest
                .strip_suffix(')')
                .ok_or_else(|| bad("expected a closing `)`"))?;
            let spec = ShiftSpec::Mixture {
                weight: parse_float(w_str, s, "w")?,
                a: Box::new(a_str.parse()?),
                b: Box::new(b_str.parse()?),
            };
            spec.validate()?;
            return Ok(spec);
        }
        Err(bad(
            "expected one of missing | suppressed:... | anticorrelated:... | mix:...",
        ))
    }
}

/// Which distribution a sampled row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowKind {
    Id,
    Missing,
    Suppressed,
    Anticorrelated,
}

impl fmt::Display for RowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RowKind::Id => "id",
            RowKind::Missing => "missing",
            RowKind::Suppressed => "suppressed",
            RowKind::Anticorrelated => "anticorrelated",
        };
        f.write_str(s)
    }
}

/// Aligned score pairs with labels, the exact conditional each label was
/// drawn from, and the per-row shift provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledShiftSet {
    pub std_scores: ScoreSet,
    pub rob_scores: ScoreSet,
    pub labels: Vec<usize>,
    /// Row `i` holds `P(Y = . | scores_i)` under the sampled distribution;
    /// rows sum to one within 1e-12.
    pub exact_conditionals: Array2<f64>,
    pub row_kinds: Vec<RowKind>,
    /// Copied from the world; gates aggregate claims that need balance.
    pub label_symmetric: bool,
}

impl SampledShiftSet {
    pub fn row_count(&self) -> usize {
        self.labels.len()
    }

    pub fn class_count(&self) -> usize {
        self.std_scores.class_count()
    }
}

/// One independent generator per row: same seed and row index always
/// reproduce the identical row, whatever order rows are generated in.
fn row_rng(seed: u64, row: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(row);
    rng
}

fn draw_class(rng: &mut ChaCha12Rng, k: usize) -> usize {
    let u: f64 = rng.random();
    ((u * k as f64) as usize).min(k - 1)
}

fn draw_latent(model: &GaussianModel, class: usize, rng: &mut ChaCha12Rng) -> Vec<f64> {
    model.locations[class]
        .iter()
        .map(|&m| {
            let z: f64 = rng.sample(StandardNormal);
            m + model.spread * z
        })
        .collect()
}

fn draw_from(probs: &[f64], rng: &mut ChaCha12Rng) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (j, &p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return j;
        }
    }
    probs.len() - 1
}

/// Per-row draw order (fixed for reproducibility): label, standard latent,
/// robust latent, then for shifted sets the mixture coin (mixtures only)
/// and the label redraw.
fn draw_score_pair(world: &WorldSpec, rng: &mut ChaCha12Rng) -> (usize, Vec<f64>, Vec<f64>) {
    let y = draw_class(rng, world.class_count);
    let u_std = draw_latent(&world.std_model, y, rng);
    let u_rob = draw_latent(&world.rob_model, y, rng);
    (
        y,
        world.std_model.log_posterior(&u_std),
        world.rob_model.log_posterior(&u_rob),
    )
}

fn sample_impl(
    world: &WorldSpec,
    shift: Option<&ShiftSpec>,
    n: usize,
    tilt: Option<&[f64]>,
) -> Result<SampledShiftSet> {
    world.validate()?;
    if let Some(spec) = shift {
        spec.validate()?;
    }
    if n == 0 {
        return Err(CoreError::empty("cannot sample zero rows"));
    }
    let k = world.class_count;
    if let Some(t) = tilt {
        if t.len() != k {
            return Err(CoreError::shape(format!(
                "marginal tilt covers {} classes, world has {k}",
                t.len()
            )));
        }
    }

    let mut std_rows = Array2::zeros((n, k));
    let mut rob_rows = Array2::zeros((n, k));
    let mut cond = Array2::zeros((n, k));
    let mut labels = Vec::with_capacity(n);
    let mut kinds = Vec::with_capacity(n);

    for i in 0..n {
        let mut rng = row_rng(world.seed, i as u64);
        let (y_id, s, r) = draw_score_pair(world, &mut rng);

        let (kind, s_out, c_row, label) = match shift {
            None => {
                let z: Vec<f64> = s.iter().zip(&r).map(|(a, b)| a + b).collect();
                (RowKind::Id, s, scores::softmax_slice(&z), y_id)
            }
            Some(spec) => {
                let variant = match spec {
                    ShiftSpec::Mixture { weight, a, b } => {
                        let coin: f64 = rng.random();
                        if coin < *weight {
                            a.as_ref()
                        } else {
                            b.as_ref()
                        }
                    }
                    other => other,
                };
                let (kind, s_out, mut c_row) = match variant {
                    ShiftSpec::MissingSpurious => {
                        // The standard model has nothing: zero scores, and
                        // the label follows the robust posterior alone.
                        (RowKind::Missing, vec![0.0; k], scores::softmax_slice(&r))
                    }
                    ShiftSpec::Suppressed { tau } => {
                        let z: Vec<f64> =
                            s.iter().zip(&r).map(|(a, b)| tau * (a + b)).collect();
                        (RowKind::Suppressed, s.clone(), scores::softmax_slice(&z))
                    }
                    ShiftSpec::Anticorrelated { alpha, beta } => {
                        let z: Vec<f64> = s
                            .iter()
                            .zip(&r)
                            .map(|(sv, rv)| alpha * rv - beta * sv)
                            .collect();
                        (RowKind::Anticorrelated, s.clone(), scores::softmax_slice(&z))
                    }
                    ShiftSpec::Mixture { .. } => unreachable!("depth limit enforced"),
                };
                if let Some(t) = tilt {
                    let total: f64 = c_row.iter().zip(t).map(|(c, w)| c * w).sum();
                    for (c, w) in c_row.iter_mut().zip(t) {
                        *c = *c * *w / total;
                    }
                }
                let label = draw_from(&c_row, &mut rng);
                (kind, s_out, c_row, label)
            }
        };

        for j in 0..k {
            std_rows[(i, j)] = s_out[j];
            rob_rows[(i, j)] = r[j];
            cond[(i, j)] = c_row[j];
        }
        labels.push(label);
        kinds.push(kind);
    }

    Ok(SampledShiftSet {
        std_scores: ScoreSet::new(std_rows)?,
        rob_scores: ScoreSet::new(rob_rows)?,
        labels,
        exact_conditionals: cond,
        row_kinds: kinds,
        label_symmetric: tilt.is_none() && world.is_label_symmetric(),
    })
}

/// Samples the in-distribution joint: uniform label, independent latents,
/// exact conditionals `softmax(s + r)`.
pub fn sample_id(world: &WorldSpec, n: usize) -> Result<SampledShiftSet> {
    sample_impl(world, None, n, None)
}

/// Samples a shifted set: score pairs keep their ID distribution, labels
/// are redrawn from the shift's conditional.
pub fn sample_ood(world: &WorldSpec, shift: &ShiftSpec, n: usize) -> Result<SampledShiftSet> {
    sample_impl(world, Some(shift), n, None)
}

/// Experimental: additionally tilts the label conditional toward `target`
/// class marginals before redrawing labels. No verification suite accepts
/// these sets' aggregate claims, and nothing beyond basic construction is
/// asserted about them.
pub fn sample_ood_marginal_shifted(
    world: &WorldSpec,
    shift: &ShiftSpec,
    n: usize,
    target: &ClassMarginals,
) -> Result<SampledShiftSet> {
    let weights = target.probs();
    sample_impl(world, Some(shift), n, Some(&weights))
}

/// Mean over rows of `1 - P(Y = prediction | scores)`: the exact expected
/// error of any per-row decision rule under the recorded conditionals.
pub fn exact_expected_error(predictions: &[usize], conditionals: &Array2<f64>) -> Result<f64> {
    if predictions.len() != conditionals.nrows() {
        return Err(CoreError::shape(format!(
            "{} predictions for {} conditional rows",
            predictions.len(),
            conditionals.nrows()
        )));
    }
    if predictions.is_empty() {
        return Err(CoreError::empty("expected error of zero rows"));
    }
    let k = conditionals.ncols();
    let mut total = 0.0;
    for (i, &p) in predictions.iter().enumerate() {
        if p >= k {
            return Err(CoreError::LabelOutOfRange {
                row: i,
                label: p,
                class_count: k,
            });
        }
        total += 1.0 - conditionals[(i, p)];
    }
    Ok(total / predictions.len() as f64)
}

/// The three verified claims about the logit-sum ensemble
/// `argmax(s + r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Proposition {
    /// In distribution the ensemble is row-wise posterior-optimal, so no
    /// combiner of the two score vectors has lower expected error.
    IdOptimality,
    /// Under missing or suppressed shifts (or mixtures of them) the
    /// ensemble is at least as good as both models.
    BenignShift,
    /// Under an anticorrelated shift the ensemble sits between the robust
    /// model (better) and the standard model (worse).
    AnticorrelatedShift,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    /// Slack multiplier for the Monte Carlo error comparisons.
    pub sigma: f64,
    /// Seed for the randomized challenger combiner.
    pub challenger_seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            sigma: 3.0,
            challenger_seed: 0,
        }
    }
}

struct SetView<'a> {
    std: &'a Array2<f64>,
    rob: &'a Array2<f64>,
    cond: &'a Array2<f64>,
    pred_std: Vec<usize>,
    pred_rob: Vec<usize>,
    pred_ens: Vec<usize>,
}

impl<'a> SetView<'a> {
    fn new(set: &'a SampledShiftSet) -> Self {
        let std = set.std_scores.as_array();
        let rob = set.rob_scores.as_array();
        let n = set.row_count();
        let mut pred_ens = Vec::with_capacity(n);
        for i in 0..n {
            let z: Vec<f64> = std
                .row(i)
                .iter()
                .zip(rob.row(i).iter())
                .map(|(a, b)| a + b)
                .collect();
            pred_ens.push(scores::argmax(&z));
        }
        SetView {
            std,
            rob,
            cond: &set.exact_conditionals,
            pred_std: scores::predict(&set.std_scores),
            pred_rob: scores::predict(&set.rob_scores),
            pred_ens,
        }
    }

    fn cond_row(&self, i: usize) -> &[f64] {
        self.cond.row(i).to_slice().expect("row-major conditionals")
    }

    fn expected_error(&self, preds: &[usize]) -> f64 {
        let mut total = 0.0;
        for (i, &p) in preds.iter().enumerate() {
            total += 1.0 - self.cond[(i, p)];
        }
        total / preds.len() as f64
    }
}

/// Checks one claim against a sampled set and reports machine-readable
/// evidence. The set's shift kinds must match the claim.
pub fn verify_proposition(
    set: &SampledShiftSet,
    which: Proposition,
    cfg: &VerifyConfig,
) -> Result<VerdictReport> {
    if set.row_count() == 0 {
        return Err(CoreError::empty("verification needs at least one row"));
    }
    if !cfg.sigma.is_finite() || cfg.sigma <= 0.0 {
        return Err(CoreError::param(format!(
            "sigma {} must be positive",
            cfg.sigma
        )));
    }
    match which {
        Proposition::IdOptimality => verify_id_optimality(set, cfg),
        Proposition::BenignShift => verify_benign_shift(set),
        Proposition::AnticorrelatedShift => verify_anticorrelated(set),
    }
}

fn require_kinds(set: &SampledShiftSet, allowed: &[RowKind], claim: &str) -> Result<()> {
    if let Some(bad) = set.row_kinds.iter().find(|k| !allowed.contains(k)) {
        return Err(CoreError::WrongShiftVariant {
            context: format!(
                "{claim} applies to {:?} rows, but the set contains {bad} rows",
                allowed.iter().map(|k| k.to_string()).collect::<Vec<_>>()
            ),
        });
    }
    Ok(())
}

/// Per-row optimality plus exact and Monte Carlo error comparisons against
/// both models and a panel of challenger combiners.
fn verify_id_optimality(set: &SampledShiftSet, cfg: &VerifyConfig) -> Result<VerdictReport> {
    require_kinds(set, &[RowKind::Id], "the in-distribution claim")?;
    let view = SetView::new(set);
    let n = set.row_count();
    let mut report = VerdictReport::new("ensemble-id-optimality");

    // The recorded conditional is softmax(s + r); the ensemble picks its
    // argmax, so it must attain the row maximum exactly.
    let mut check = CheckResult::pass("per-row-posterior-optimality").metric("rows", n as f64);
    for i in 0..n {
        let row = view.cond_row(i);
        let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if row[view.pred_ens[i]] < best {
            check = CheckResult::fail(
                "per-row-posterior-optimality",
                format!(
                    "row {i}: ensemble posterior {} below best {best}",
                    row[view.pred_ens[i]]
                ),
            );
            break;
        }
    }
    report.push(check);

    let err_ens = view.expected_error(&view.pred_ens);

    for (name, preds) in [
        ("mc-error-vs-standard", &view.pred_std),
        ("mc-error-vs-robust", &view.pred_rob),
    ] {
        report.push(mc_error_check(name, &view.pred_ens, preds, &set.labels, cfg.sigma));
    }

    // Challenger panel, judged on exact expected error. Fixed-weight rules
    // cover the tuning grid; the confidence selector and the coin-flip
    // mixer cover common ad-hoc fallbacks.
    let mut worst_margin = f64::INFINITY;
    let mut worst_alpha = f64::NAN;
    let mut grid_ok = true;
    let mut first_violation = None;
    for alpha in alpha_grid() {
        let preds: Vec<usize> = (0..n)
            .map(|i| {
                let z: Vec<f64> = view
                    .std
                    .row(i)
                    .iter()
                    .zip(view.rob.row(i).iter())
                    .map(|(s, r)| alpha * s + (1.0 - alpha) * r)
                    .collect();
                scores::argmax(&z)
            })
            .collect();
        let err = view.expected_error(&preds);
        let margin = err - err_ens;
        if margin < worst_margin {
            worst_margin = margin;
            worst_alpha = alpha;
        }
        if err_ens > err && first_violation.is_none() {
            grid_ok = false;
            first_violation = Some(format!(
                "fixed weight {alpha}: challenger error {err} below ensemble {err_ens}"
            ));
        }
    }
    let mut grid_check = if grid_ok {
        CheckResult::pass("challenger-fixed-weights")
    } else {
        CheckResult::fail("challenger-fixed-weights", first_violation.unwrap())
    };
    grid_check = grid_check
        .metric("expected_error_ensemble", err_ens)
        .metric("worst_margin", worst_margin)
        .metric("worst_margin_weight", worst_alpha);
    report.push(grid_check);

    let conf_preds: Vec<usize> = (0..n)
        .map(|i| {
            let s_row = view.std.row(i);
            let r_row = view.rob.row(i);
            let conf = |row: ndarray::ArrayView1<f64>| {
                let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let denom: f64 = row.iter().map(|&x| (x - m).exp()).sum();
                1.0 / denom
            };
            if conf(s_row) >= conf(r_row) {
                view.pred_std[i]
            } else {
                view.pred_rob[i]
            }
        })
        .collect();
    report.push(exact_challenger_check(
        "challenger-max-confidence",
        err_ens,
        view.expected_error(&conf_preds),
    ));

    let mut coin_rng = ChaCha12Rng::seed_from_u64(cfg.challenger_seed);
    let mix_preds: Vec<usize> = (0..n)
        .map(|i| {
            if coin_rng.random::<f64>() < 0.5 {
                view.pred_std[i]
            } else {
                view.pred_rob[i]
            }
        })
        .collect();
    report.push(exact_challenger_check(
        "challenger-random-mixer",
        err_ens,
        view.expected_error(&mix_preds),
    ));

    Ok(report)
}

fn exact_challenger_check(name: &str, err_ens: f64, err_challenger: f64) -> CheckResult {
    let base = if err_ens <= err_challenger {
        CheckResult::pass(name)
    } else {
        CheckResult::fail(
            name,
            format!("challenger error {err_challenger} below ensemble {err_ens}"),
        )
    };
    base.metric("expected_error_ensemble", err_ens)
        .metric("expected_error_challenger", err_challenger)
        .metric("margin", err_challenger - err_ens)
}

/// One-sided paired comparison on sampled labels: the ensemble's empirical
/// error may exceed the baseline's by at most `sigma` standard errors of
/// the paired difference.
fn mc_error_check(
    name: &str,
    pred_ens: &[usize],
    pred_base: &[usize],
    labels: &[usize],
    sigma: f64,
) -> CheckResult {
    let n = labels.len();
    let mut diff_sum = 0.0f64;
    let mut diff_sq = 0.0f64;
    let mut err_ens = 0usize;
    let mut err_base = 0usize;
    for i in 0..n {
        let e = (pred_ens[i] != labels[i]) as i32;
        let b = (pred_base[i] != labels[i]) as i32;
        err_ens += e as usize;
        err_base += b as usize;
        let d = (e - b) as f64;
        diff_sum += d;
        diff_sq += d * d;
    }
    let mean = diff_sum / n as f64;
    let var = if n > 1 {
        (diff_sq - diff_sum * diff_sum / n as f64) / (n as f64 - 1.0)
    } else {
        0.0
    };
    let slack = sigma * (var.max(0.0) / n as f64).sqrt();
    let base = if mean <= slack {
        CheckResult::pass(name)
    } else {
        CheckResult::fail(
            name,
            format!("paired error excess {mean} exceeds slack {slack}"),
        )
    };
    base.metric("mc_error_ensemble", err_ens as f64 / n as f64)
        .metric("mc_error_baseline", err_base as f64 / n as f64)
        .metric("paired_excess", mean)
        .metric("slack", slack)
}

/// Missing rows must follow the robust model exactly; suppressed rows must
/// stay posterior-optimal; the aggregate comparison runs only on
/// label-symmetric worlds, where class balance holds by symmetry.
fn verify_benign_shift(set: &SampledShiftSet) -> Result<VerdictReport> {
    require_kinds(
        set,
        &[RowKind::Missing, RowKind::Suppressed],
        "the benign-shift claim",
    )?;
    let view = SetView::new(set);
    let n = set.row_count();
    let mut report = VerdictReport::new("benign-shift-best-of-both");

    let missing_rows: Vec<usize> = (0..n)
        .filter(|&i| set.row_kinds[i] == RowKind::Missing)
        .collect();
    let suppressed_rows: Vec<usize> = (0..n)
        .filter(|&i| set.row_kinds[i] == RowKind::Suppressed)
        .collect();

    if missing_rows.is_empty() {
        report.push(CheckResult::skipped(
            "missing-rows-follow-robust",
            "no missing rows in this set",
        ));
    } else {
        let mut check = CheckResult::pass("missing-rows-follow-robust")
            .metric("rows", missing_rows.len() as f64);
        for &i in &missing_rows {
            if view.pred_ens[i] != view.pred_rob[i] {
                check = CheckResult::fail(
                    "missing-rows-follow-robust",
                    format!(
                        "row {i}: ensemble predicted {}, robust model {}",
                        view.pred_ens[i], view.pred_rob[i]
                    ),
                );
                break;
            }
        }
        report.push(check);
    }

    if suppressed_rows.is_empty() {
        report.push(CheckResult::skipped(
            "suppressed-rows-posterior-optimal",
            "no suppressed rows in this set",
        ));
    } else {
        let mut check = CheckResult::pass("suppressed-rows-posterior-optimal")
            .metric("rows", suppressed_rows.len() as f64);
        for &i in &suppressed_rows {
            let row = view.cond_row(i);
            let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if row[view.pred_ens[i]] < best {
                check = CheckResult::fail(
                    "suppressed-rows-posterior-optimal",
                    format!(
                        "row {i}: ensemble posterior {} below best {best}",
                        row[view.pred_ens[i]]
                    ),
                );
                break;
            }
        }
        report.push(check);
    }

    if set.label_symmetric {
        let err_ens = view.expected_error(&view.pred_ens);
        let err_std = view.expected_error(&view.pred_std);
        let err_rob = view.expected_error(&view.pred_rob);
        let ok = err_ens <= err_std && err_ens <= err_rob;
        let base = if ok {
            CheckResult::pass("aggregate-expected-error")
        } else {
            CheckResult::fail(
                "aggregate-expected-error",
                format!("ensemble {err_ens} vs standard {err_std}, robust {err_rob}"),
            )
        };
        report.push(
            base.metric("expected_error_ensemble", err_ens)
                .metric("expected_error_standard", err_std)
                .metric("expected_error_robust", err_rob),
        );
    } else {
        report.push(CheckResult::skipped(
            "aggregate-expected-error",
            "world is not label-symmetric; the aggregate claim needs class balance, \
             so only the per-row checks ran",
        ));
    }

    Ok(report)
}

/// The exact per-row posterior chain robust >= ensemble >= standard, plus
/// the aggregate ordering it implies.
fn verify_anticorrelated(set: &SampledShiftSet) -> Result<VerdictReport> {
    require_kinds(set, &[RowKind::Anticorrelated], "the anticorrelated claim")?;
    let view = SetView::new(set);
    let n = set.row_count();
    let mut report = VerdictReport::new("anticorrelated-shift-ordering");

    let mut check = CheckResult::pass("per-row-ordering-chain").metric("rows", n as f64);
    for i in 0..n {
        let row = view.cond_row(i);
        let p_rob = row[view.pred_rob[i]];
        let p_ens = row[view.pred_ens[i]];
        let p_std = row[view.pred_std[i]];
        if !(p_rob >= p_ens && p_ens >= p_std) {
            check = CheckResult::fail(
                "per-row-ordering-chain",
                format!("row {i}: posteriors rob {p_rob}, ens {p_ens}, std {p_std}"),
            );
            break;
        }
    }
    report.push(check);

    let err_rob = view.expected_error(&view.pred_rob);
    let err_ens = view.expected_error(&view.pred_ens);
    let err_std = view.expected_error(&view.pred_std);
    let ok = err_rob <= err_ens && err_ens <= err_std;
    let base = if ok {
        CheckResult::pass("aggregate-expected-error-ordering")
    } else {
        CheckResult::fail(
            "aggregate-expected-error-ordering",
            format!("expected robust {err_rob} <= ensemble {err_ens} <= standard {err_std}"),
        )
    };
    report.push(
        base.metric("expected_error_robust", err_rob)
            .metric("expected_error_ensemble", err_ens)
            .metric("expected_error_standard", err_std),
    );

    Ok(report)
}
