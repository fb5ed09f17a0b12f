//! Discrete joint distributions over score pairs where every quantity the
//! theory talks about is computable in closed form.
//!
//! A table places probability on a finite support of standard-score
//! vectors `s` and robust-score vectors `r`. Construction enforces the
//! three structural assumptions exactly:
//! - both models are calibrated: `P(y | s) = softmax(s)_y` and likewise
//!   for `r`,
//! - the two score vectors are conditionally independent given the label,
//! - the label marginal is the requested one.
//!
//! Calibration pins the score marginals down: writing `a_s = P(S = s)`,
//! consistency requires `sum_s a_s * softmax(s)_y = pi_y` for every class,
//! a linear system in `a`. When it has no nonnegative solution the
//! requested table simply does not exist and construction reports which
//! constraint failed. Otherwise every cell probability is
//! `P(s, r, y) = a_s * b_r * softmax(s)_y * softmax(r)_y / pi_y`.
//!
//! On such a table the combined posterior has the closed form
//! `P(y | s, r) = softmax(s + r - m)_y` with `m_y = log pi_y`, the Bayes
//! error is a finite sum, and for small supports every combiner of the
//! two score vectors can be enumerated outright.

use crate::error::{CoreError, Result};
use crate::scores::{self, ClassMarginals};

/// Construction and identity checks use this tolerance.
pub const TABLE_TOL: f64 = 1e-9;
/// Exact-arithmetic comparisons (sums of the same cells) use this.
pub const EXACT_TOL: f64 = 1e-12;
/// Exhaustive enumeration refuses tables with more cells than this.
pub const CELL_LIMIT: usize = 12;

/// A fully materialized finite joint distribution `P(s, r, y)`.
#[derive(Debug, Clone)]
pub struct JointTable {
    class_count: usize,
    s_support: Vec<Vec<f64>>,
    r_support: Vec<Vec<f64>>,
    marginals: ClassMarginals,
    s_weights: Vec<f64>,
    r_weights: Vec<f64>,
    /// `cells[si][ri][y] = P(s, r, y)`.
    cells: Vec<Vec<Vec<f64>>>,
}

impl JointTable {
    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn s_len(&self) -> usize {
        self.s_support.len()
    }

    pub fn r_len(&self) -> usize {
        self.r_support.len()
    }

    pub fn cell_count(&self) -> usize {
        self.s_len() * self.r_len()
    }

    pub fn s_point(&self, i: usize) -> &[f64] {
        &self.s_support[i]
    }

    pub fn r_point(&self, i: usize) -> &[f64] {
        &self.r_support[i]
    }

    pub fn s_weight(&self, i: usize) -> f64 {
        self.s_weights[i]
    }

    pub fn r_weight(&self, i: usize) -> f64 {
        self.r_weights[i]
    }

    pub fn marginals(&self) -> &ClassMarginals {
        &self.marginals
    }

    /// `P(s, r, y)` for one cell and class.
    pub fn cell_label_prob(&self, si: usize, ri: usize, y: usize) -> f64 {
        self.cells[si][ri][y]
    }

    /// `P(s, r)`, the cell mass summed over labels.
    pub fn cell_prob(&self, si: usize, ri: usize) -> f64 {
        self.cells[si][ri].iter().sum()
    }

    /// Exact posterior `P(y | s, r)` read off the table, or `None` for a
    /// zero-probability cell.
    pub fn conditional(&self, si: usize, ri: usize) -> Option<Vec<f64>> {
        let p = self.cell_prob(si, ri);
        if p <= 0.0 {
            return None;
        }
        Some(self.cells[si][ri].iter().map(|c| c / p).collect())
    }

    /// Expected error of the best possible decision rule given both score
    /// vectors: `sum_cells (P(s,r) - max_y P(s,r,y))`.
    pub fn bayes_error(&self) -> f64 {
        let mut total = 0.0;
        for si in 0..self.s_len() {
            for ri in 0..self.r_len() {
                let cell = &self.cells[si][ri];
                let p: f64 = cell.iter().sum();
                let best = cell.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                total += p - best;
            }
        }
        total
    }
}

/// A deterministic combiner: one class choice per table cell, indexed
/// `s`-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombinerTable {
    pub choices: Vec<usize>,
}

/// Expected error of an arbitrary combiner on the table.
pub fn combiner_error(table: &JointTable, combiner: &CombinerTable) -> Result<f64> {
    if combiner.choices.len() != table.cell_count() {
        return Err(CoreError::shape(format!(
            "combiner covers {} cells, table has {}",
            combiner.choices.len(),
            table.cell_count()
        )));
    }
    let mut total = 0.0;
    for si in 0..table.s_len() {
        for ri in 0..table.r_len() {
            let y = combiner.choices[si * table.r_len() + ri];
            if y >= table.class_count {
                return Err(CoreError::LabelOutOfRange {
                    row: si * table.r_len() + ri,
                    label: y,
                    class_count: table.class_count,
                });
            }
            total += table.cell_prob(si, ri) - table.cell_label_prob(si, ri, y);
        }
    }
    Ok(total)
}

/// The marginal-corrected logit-sum rule `argmax_y (s + r - m)_y` written
/// out as a combiner table.
pub fn ensemble_combiner(table: &JointTable) -> CombinerTable {
    let m = table.marginals.log_probs();
    let mut choices = Vec::with_capacity(table.cell_count());
    for si in 0..table.s_len() {
        for ri in 0..table.r_len() {
            let z: Vec<f64> = (0..table.class_count)
                .map(|y| table.s_support[si][y] + table.r_support[ri][y] - m[y])
                .collect();
            choices.push(scores::argmax(&z));
        }
    }
    CombinerTable { choices }
}

/// Solves `sum_j w_j * softmax(support_j)_y = pi_y` for the support
/// weights. Square systems go through Gaussian elimination with partial
/// pivoting; over/under-determined ones through normal equations, which
/// find the minimum-norm candidate. Either way the solution is verified
/// against the original system and against nonnegativity, so an accepted
/// answer is always a genuine distribution. (For non-square supports a
/// nonnegative solution off the minimum-norm point would be missed; the
/// error then still correctly reports that this solver found none.)
fn solve_weights(support: &[Vec<f64>], pi: &[f64], side: &str) -> Result<Vec<f64>> {
    let k = pi.len();
    let cols: Vec<Vec<f64>> = support.iter().map(|s| scores::softmax_slice(s)).collect();
    let n = cols.len();
    let entry = |y: usize, j: usize| cols[j][y];

    let mut w: Vec<f64> = if n == 1 {
        vec![1.0]
    } else if n == k {
        let m: Vec<Vec<f64>> = (0..k).map(|y| (0..n).map(|j| entry(y, j)).collect()).collect();
        solve_square(m, pi.to_vec()).ok_or_else(|| CoreError::InfeasibleTable {
            context: format!("{side}: the calibration system is singular for this support"),
        })?
    } else if n > k {
        // Minimum-norm: w = M^T v with (M M^T) v = pi.
        let mut g = vec![vec![0.0; k]; k];
        for (a, row) in g.iter_mut().enumerate() {
            for (b, cell) in row.iter_mut().enumerate() {
                *cell = (0..n).map(|j| entry(a, j) * entry(b, j)).sum();
            }
        }
        let v = solve_square(g, pi.to_vec()).ok_or_else(|| CoreError::InfeasibleTable {
            context: format!("{side}: the calibration system is degenerate for this support"),
        })?;
        (0..n)
            .map(|j| (0..k).map(|y| entry(y, j) * v[y]).sum())
            .collect()
    } else {
        // Least squares: (M^T M) w = M^T pi.
        let mut g = vec![vec![0.0; n]; n];
        for (a, row) in g.iter_mut().enumerate() {
            for (b, cell) in row.iter_mut().enumerate() {
                *cell = (0..k).map(|y| entry(y, a) * entry(y, b)).sum();
            }
        }
        let rhs: Vec<f64> = (0..n).map(|j| (0..k).map(|y| entry(y, j) * pi[y]).sum()).collect();
        solve_square(g, rhs).ok_or_else(|| CoreError::InfeasibleTable {
            context: format!("{side}: the calibration system is degenerate for this support"),
        })?
    };

    for (y, &target) in pi.iter().enumerate() {
        let got: f64 = (0..n).map(|j| entry(y, j) * w[j]).sum();
        if (got - target).abs() > TABLE_TOL {
            return Err(CoreError::InfeasibleTable {
                context: format!(
                    "{side}: no score marginal matches; class {y} needs probability {target} \
                     but the support can only produce {got}"
                ),
            });
        }
    }
    for (j, v) in w.iter_mut().enumerate() {
        if *v < -TABLE_TOL {
            return Err(CoreError::InfeasibleTable {
                context: format!(
                    "{side}: support point {j} would need negative probability {v}"
                ),
            });
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(w)
}

#[allow(clippy::needless_range_loop)]
fn solve_square(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| {
            m[a][col].abs().partial_cmp(&m[b][col].abs()).expect("finite pivots")
        })?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for c in col..n {
                m[row][c] -= f * m[col][c];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for c in row + 1..n {
            acc -= m[row][c] * x[c];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

/// Builds the unique conditionally independent calibrated joint over the
/// given supports and label marginals, or explains why none exists.
pub fn make_joint_table(
    s_support: &[Vec<f64>],
    r_support: &[Vec<f64>],
    marginals: &ClassMarginals,
) -> Result<JointTable> {
    let k = marginals.class_count();
    for (name, support) in [("standard", s_support), ("robust", r_support)] {
        if support.is_empty() {
            return Err(CoreError::empty(format!("{name} score support")));
        }
        for (j, s) in support.iter().enumerate() {
            if s.len() != k {
                return Err(CoreError::shape(format!(
                    "{name} support point {j} has {} scores for {k} classes",
                    s.len()
                )));
            }
            if let Some(v) = s.iter().find(|v| !v.is_finite()) {
                return Err(CoreError::param(format!(
                    "non-finite score {v} in {name} support point {j}"
                )));
            }
        }
    }

    let pi = marginals.probs();
    let s_weights = solve_weights(s_support, &pi, "standard-score weights")?;
    let r_weights = solve_weights(r_support, &pi, "robust-score weights")?;

    let s_sm: Vec<Vec<f64>> = s_support.iter().map(|s| scores::softmax_slice(s)).collect();
    let r_sm: Vec<Vec<f64>> = r_support.iter().map(|r| scores::softmax_slice(r)).collect();

    let mut cells = vec![vec![vec![0.0; k]; r_support.len()]; s_support.len()];
    let mut total = 0.0;
    for si in 0..s_support.len() {
        for ri in 0..r_support.len() {
            for y in 0..k {
                let p = s_weights[si] * r_weights[ri] * s_sm[si][y] * r_sm[ri][y] / pi[y];
                cells[si][ri][y] = p;
                total += p;
            }
        }
    }
    if (total - 1.0).abs() > TABLE_TOL {
        return Err(CoreError::InfeasibleTable {
            context: format!("constructed cells sum to {total}, not 1"),
        });
    }

    let table = JointTable {
        class_count: k,
        s_support: s_support.to_vec(),
        r_support: r_support.to_vec(),
        marginals: marginals.clone(),
        s_weights,
        r_weights,
        cells,
    };

    // Calibration holds by construction; re-derive it from the finished
    // cells as a defense against solver drift.
    for (si, sm_row) in s_sm.iter().enumerate() {
        if table.s_weights[si] == 0.0 {
            continue;
        }
        for (y, &cal) in sm_row.iter().enumerate() {
            let joint: f64 = (0..table.r_len()).map(|ri| table.cells[si][ri][y]).sum();
            let got = joint / table.s_weights[si];
            if (got - cal).abs() > TABLE_TOL {
                return Err(CoreError::InfeasibleTable {
                    context: format!(
                        "standard calibration drifted at support point {si}, class {y}: \
                         {got} vs {cal}"
                    ),
                });
            }
        }
    }
    Ok(table)
}

/// Outcome of one closed-form identity check on a table.
#[derive(Debug, Clone)]
pub struct IdentityCheck {
    pub max_deviation: f64,
    pub tolerance: f64,
    pub worst_cell: (usize, usize),
    pub passed: bool,
}

fn posterior_deviation(table: &JointTable, subtract_marginal: bool) -> IdentityCheck {
    let m = table.marginals.log_probs();
    let mut worst = 0.0;
    let mut worst_cell = (0, 0);
    for si in 0..table.s_len() {
        for ri in 0..table.r_len() {
            let Some(cond) = table.conditional(si, ri) else {
                continue;
            };
            let z: Vec<f64> = (0..table.class_count)
                .map(|y| {
                    let base = table.s_support[si][y] + table.r_support[ri][y];
                    if subtract_marginal {
                        base - m[y]
                    } else {
                        base
                    }
                })
                .collect();
            let predicted = scores::softmax_slice(&z);
            for y in 0..table.class_count {
                let dev = (cond[y] - predicted[y]).abs();
                if dev > worst {
                    worst = dev;
                    worst_cell = (si, ri);
                }
            }
        }
    }
    IdentityCheck {
        max_deviation: worst,
        tolerance: TABLE_TOL,
        worst_cell,
        passed: worst <= TABLE_TOL,
    }
}

/// Verifies the closed form of the combined posterior,
/// `P(y | s, r) = softmax(s + r - m)_y` with `m_y = log pi_y`, against
/// the exact table conditionals.
pub fn check_lemma_softmax(table: &JointTable) -> IdentityCheck {
    posterior_deviation(table, true)
}

/// Negative control: the same identity with the marginal correction
/// dropped. On any table with non-uniform label marginals this must fail;
/// a pass there would mean the check has no teeth.
pub fn check_lemma_without_marginal_term(table: &JointTable) -> IdentityCheck {
    posterior_deviation(table, false)
}

/// Outcome of enumerating every deterministic combiner on a small table.
#[derive(Debug, Clone)]
pub struct ExhaustiveCheck {
    pub combiner_count: f64,
    pub bayes_error: f64,
    pub ensemble_error: f64,
    pub best_error: f64,
    pub passed: bool,
}

/// Enumerates all `K^cells` deterministic combiners and confirms that the
/// marginal-corrected logit sum attains the Bayes error and that no
/// combiner beats it.
pub fn check_prop1_exhaustive(table: &JointTable) -> Result<ExhaustiveCheck> {
    let cells = table.cell_count();
    let k = table.class_count;
    let combiners = (k as f64).powi(cells as i32);
    if cells > CELL_LIMIT || combiners > 2e7 {
        return Err(CoreError::SupportTooLarge {
            cells,
            combiners,
            limit: CELL_LIMIT,
        });
    }

    // Flatten cell data once; enumeration touches it K^cells times.
    let mut cell_probs = Vec::with_capacity(cells);
    let mut cell_class = Vec::with_capacity(cells);
    for si in 0..table.s_len() {
        for ri in 0..table.r_len() {
            cell_probs.push(table.cell_prob(si, ri));
            cell_class.push(table.cells[si][ri].clone());
        }
    }
    let err_of = |choices: &[usize]| -> f64 {
        let mut total = 0.0;
        for (c, &y) in choices.iter().enumerate() {
            total += cell_probs[c] - cell_class[c][y];
        }
        total
    };

    let ens = ensemble_combiner(table);
    let ensemble_error = err_of(&ens.choices);

    let total = (k as u64).pow(cells as u32);
    let mut best_error = f64::INFINITY;
    let mut digits = vec![0usize; cells];
    for code in 0..total {
        let mut c = code;
        for d in digits.iter_mut() {
            *d = (c % k as u64) as usize;
            c /= k as u64;
        }
        let e = err_of(&digits);
        if e < best_error {
            best_error = e;
        }
    }

    let bayes = table.bayes_error();
    let passed =
        (ensemble_error - bayes).abs() <= EXACT_TOL && best_error >= ensemble_error - EXACT_TOL;
    Ok(ExhaustiveCheck {
        combiner_count: combiners,
        bayes_error: bayes,
        ensemble_error,
        best_error,
        passed,
    })
}

/// Outcome of the trivial-bound sanity check.
#[derive(Debug, Clone)]
pub struct TrivialBoundCheck {
    pub bayes_error: f64,
    pub bound: f64,
    pub passed: bool,
}

/// The Bayes error can never exceed the error of always predicting the
/// most common class.
pub fn check_corollary_trivial_bound(table: &JointTable) -> TrivialBoundCheck {
    let bound = 1.0
        - table
            .marginals
            .probs()
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
    let bayes = table.bayes_error();
    TrivialBoundCheck {
        bayes_error: bayes,
        bound,
        passed: bayes <= bound + EXACT_TOL,
    }
}

/// Two-point symmetric support: score vectors `[g, 0]` and `[0, g]`.
fn two_point(g: f64) -> Vec<Vec<f64>> {
    vec![vec![g, 0.0], vec![0.0, g]]
}

/// One-hot supports in `k` classes with strength `g`.
fn one_hot_support(k: usize, g: f64) -> Vec<Vec<f64>> {
    (0..k)
        .map(|y| (0..k).map(|j| if j == y { g } else { 0.0 }).collect())
        .collect()
}

/// A fixed corpus of feasible tables spanning class counts, support
/// shapes, and skewed label marginals. Every fixture is feasible by
/// construction: skewed tables start from chosen support weights and
/// derive the marginals those weights imply.
pub fn fixture_corpus() -> Vec<(String, JointTable)> {
    let mut corpus = Vec::new();
    let uniform2 = ClassMarginals::uniform(2).expect("two classes");

    let gammas = [0.5, 1.0, 3.0f64.ln(), 2.0];
    for &gs in &gammas {
        for &gr in &gammas {
            let table = make_joint_table(&two_point(gs), &two_point(gr), &uniform2)
                .expect("symmetric two-class fixture");
            corpus.push((format!("k2-sym-s{gs:.3}-r{gr:.3}"), table));
        }
    }

    // Skewed label marginals: pick the support weights, read off the
    // marginal they induce, and let construction recover the weights.
    for (g, a0) in [(1.0, 0.7), (3.0f64.ln(), 0.6), (2.0, 0.8)] {
        let support = two_point(g);
        let sm: Vec<Vec<f64>> = support.iter().map(|s| scores::softmax_slice(s)).collect();
        let pi: Vec<f64> = (0..2)
            .map(|y| a0 * sm[0][y] + (1.0 - a0) * sm[1][y])
            .collect();
        let marginals = ClassMarginals::from_probs(&pi).expect("valid induced marginal");
        let table =
            make_joint_table(&support, &support, &marginals).expect("skewed two-class fixture");
        corpus.push((format!("k2-skew-a{a0:.1}-g{g:.3}"), table));
    }

    let uniform3 = ClassMarginals::uniform(3).expect("three classes");
    let table = make_joint_table(&one_hot_support(3, 2.0), &one_hot_support(3, 1.0), &uniform3)
        .expect("three-class fixture");
    corpus.push(("k3-onehot".to_string(), table));

    let uniform4 = ClassMarginals::uniform(4).expect("four classes");
    let table = make_joint_table(
        &[vec![0.0; 4]],
        &one_hot_support(4, 1.5),
        &uniform4,
    )
    .expect("four-class singleton fixture");
    corpus.push(("k4-uninformative-standard".to_string(), table));

    // 16 cells: identity checks only, too large to enumerate combiners.
    let table = make_joint_table(&one_hot_support(4, 1.0), &one_hot_support(4, 1.0), &uniform4)
        .expect("four-class wide fixture");
    corpus.push(("k4-onehot-wide".to_string(), table));

    corpus
}
