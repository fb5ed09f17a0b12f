//! Property tests for the algebraic invariants of scoring, calibration,
//! combination, and aggregation.

use calens_core::calibration::{average_confidence, fit_temperature_to_target, TemperatureScale};
use calens_core::ensemble::{combine, EnsembleConfig, EnsembleStrategy};
use calens_core::eval::{aggregate, DatasetEval, EvalRow};
use calens_core::oracle::{combiner_error, fixture_corpus, CombinerTable};
use calens_core::scores::{accuracy_of, error_rate_of, predict, softmax_rows, ScoreSet};
use proptest::prelude::*;

/// Scores on a coarse grid: knife-edge floating-point ties cannot occur,
/// so argmax comparisons are stable under exact rescalings.
fn grid_val() -> impl Strategy<Value = f64> {
    (-300i32..=300).prop_map(|v| f64::from(v) / 100.0)
}

fn score_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..=5, 1usize..=8).prop_flat_map(|(k, n)| {
        prop::collection::vec(prop::collection::vec(grid_val(), k), n)
    })
}

fn score_matrix_pair() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    (2usize..=5, 1usize..=8).prop_flat_map(|(k, n)| {
        (
            prop::collection::vec(prop::collection::vec(grid_val(), k), n),
            prop::collection::vec(prop::collection::vec(grid_val(), k), n),
        )
    })
}

proptest! {
    #[test]
    fn softmax_is_invariant_to_per_row_shifts(rows in score_matrix(), shift in grid_val()) {
        let base = ScoreSet::from_rows(&rows).unwrap();
        let shifted_rows: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(|v| v + shift).collect())
            .collect();
        let shifted = ScoreSet::from_rows(&shifted_rows).unwrap();
        let a = softmax_rows(&base);
        let b = softmax_rows(&shifted);
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn argmax_survives_exact_positive_rescaling(rows in score_matrix(), exp in -3i32..=3) {
        // Powers of two rescale every float exactly, so even tied rows
        // keep their tie structure.
        let factor = f64::powi(2.0, exp);
        let base = ScoreSet::from_rows(&rows).unwrap();
        let scaled = base.scaled(factor).unwrap();
        prop_assert_eq!(predict(&base), predict(&scaled));
        let tempered = TemperatureScale::new(factor).unwrap().apply(&base).unwrap();
        prop_assert_eq!(predict(&base), predict(&tempered));
    }

    #[test]
    fn error_and_accuracy_sum_to_exactly_one(
        pairs in prop::collection::vec((0usize..5, 0usize..5), 1..200),
    ) {
        let preds: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let labels: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let err = error_rate_of(&preds, &labels).unwrap();
        let acc = accuracy_of(&preds, &labels).unwrap();
        prop_assert_eq!(err + acc, 1.0);
    }

    #[test]
    fn confidence_never_increases_with_temperature(
        rows in score_matrix(),
        t1 in 1u32..200,
        dt in 1u32..200,
    ) {
        let s = ScoreSet::from_rows(&rows).unwrap();
        let lo = f64::from(t1) / 20.0;
        let hi = lo + f64::from(dt) / 20.0;
        let c_lo = average_confidence(&s, lo).unwrap();
        let c_hi = average_confidence(&s, hi).unwrap();
        prop_assert!(c_lo + 1e-12 >= c_hi, "conf({lo}) = {c_lo} < conf({hi}) = {c_hi}");
    }

    #[test]
    fn unweighted_combination_is_commutative((a, b) in score_matrix_pair()) {
        let sa = ScoreSet::from_rows(&a).unwrap();
        let sb = ScoreSet::from_rows(&b).unwrap();
        for strategy in [EnsembleStrategy::Logits, EnsembleStrategy::Probs] {
            let cfg = EnsembleConfig::plain(strategy).unwrap();
            let ab = combine(&sa, &sb, &cfg).unwrap();
            let ba = combine(&sb, &sa, &cfg).unwrap();
            for (x, y) in ab.as_array().iter().zip(ba.as_array().iter()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn no_random_combiner_beats_the_bayes_error(
        idx in 0usize..21,
        raw in prop::collection::vec(0usize..6, 16),
    ) {
        let corpus = fixture_corpus();
        let (name, table) = &corpus[idx % corpus.len()];
        let choices: Vec<usize> = raw
            .iter()
            .take(table.cell_count())
            .map(|c| c % table.class_count())
            .collect();
        if choices.len() == table.cell_count() {
            let err = combiner_error(table, &CombinerTable { choices }).unwrap();
            prop_assert!(
                err >= table.bayes_error() - 1e-12,
                "{name}: combiner error {err} below Bayes {}",
                table.bayes_error()
            );
        }
    }

    #[test]
    fn aggregation_ignores_dataset_order(
        accs in prop::collection::vec((0u32..10_000, 0u32..10_000), 2..6),
    ) {
        let evals: Vec<DatasetEval> = accs
            .iter()
            .enumerate()
            .map(|(i, &(id, ood))| DatasetEval {
                dataset: format!("d{i}"),
                tag: None,
                rows: vec![EvalRow {
                    model_name: "m".to_string(),
                    id_accuracy: f64::from(id) / 100.0,
                    ood_accuracy: Some(f64::from(ood) / 100.0),
                    id_worst_group: None,
                    ood_worst_group: None,
                }],
            })
            .collect();
        let fwd = aggregate(&evals).unwrap();
        let mut shuffled = evals.clone();
        shuffled.reverse();
        let rev = aggregate(&shuffled).unwrap();
        prop_assert_eq!(fwd[0].mean_id_accuracy.to_bits(), rev[0].mean_id_accuracy.to_bits());
        prop_assert_eq!(
            fwd[0].mean_ood_accuracy.unwrap().to_bits(),
            rev[0].mean_ood_accuracy.unwrap().to_bits()
        );
    }

    #[test]
    fn fitted_temperatures_hit_their_target_or_say_why_not(
        rows in score_matrix(),
        target_pct in 5u32..100,
    ) {
        let s = ScoreSet::from_rows(&rows).unwrap();
        let target = f64::from(target_pct) / 100.0;
        let fit = fit_temperature_to_target(&s, target, 1e-6).unwrap();
        prop_assert!(fit.t >= 1e-3 && fit.t <= 1e3);
        if !fit.clamped {
            let conf = average_confidence(&s, fit.t).unwrap();
            prop_assert!((conf - target).abs() <= 1e-6, "conf {conf} target {target}");
        }
    }
}
