//! Fixture builders shared by the criterion benches.

use calens_core::synthetic::{sample_id, WorldSpec};
use calens_core::{LabeledScores, ScoreSet};

/// A synthetic `n` by `k` score matrix drawn from a fixed world.
pub fn score_matrix(n: usize, k: usize, seed: u64) -> ScoreSet {
    let world = WorldSpec::symmetric(k, 2.0, 1.2, seed).unwrap();
    sample_id(&world, n).unwrap().std_scores
}

/// Matching standard and robust score matrices over the same rows.
pub fn score_pair(n: usize, k: usize, seed: u64) -> (ScoreSet, ScoreSet) {
    let world = WorldSpec::symmetric(k, 2.0, 1.2, seed).unwrap();
    let set = sample_id(&world, n).unwrap();
    (set.std_scores, set.rob_scores)
}

/// Labeled scores for calibration benches.
pub fn labeled_scores(n: usize, k: usize, seed: u64) -> LabeledScores {
    let world = WorldSpec::symmetric(k, 2.0, 1.2, seed).unwrap();
    let set = sample_id(&world, n).unwrap();
    LabeledScores::new(set.std_scores, set.labels).unwrap()
}

/// Standard and robust labeled sets over the same rows, for fitting.
pub fn labeled_pair(n: usize, k: usize, seed: u64) -> (LabeledScores, LabeledScores) {
    let world = WorldSpec::symmetric(k, 2.0, 1.2, seed).unwrap();
    let set = sample_id(&world, n).unwrap();
    let std = LabeledScores::new(set.std_scores, set.labels.clone()).unwrap();
    let rob = LabeledScores::new(set.rob_scores, set.labels).unwrap();
    (std, rob)
}
