//! Confidence-calibrated ensembling of paired classifier scores.
//!
//! Two models score the same examples: a standard model that is accurate
//! in distribution and a robust model that degrades more gracefully under
//! shift. This crate combines their per-example score vectors into a single
//! ensemble score, after matching each model's average confidence to its
//! validation accuracy via temperature scaling.
//!
//! Modules:
//! - [`scores`]: score matrices, softmax, argmax prediction, error rates.
//! - [`calibration`]: confidence-matching temperature fits and reliability
//!   diagrams (ECE).
//! - [`ensemble`]: combination strategies, weight tuning, the calibrated
//!   ensemble builder, and a miscalibration demonstration.
//! - [`synthetic`]: a Gaussian-latent world that is calibrated and
//!   conditionally independent by construction, three distribution-shift
//!   samplers, and verification suites for the ensemble's error guarantees.
//! - [`oracle`]: finite joint tables where every probability is enumerable,
//!   used to check the ensemble's optimality claims exhaustively.
//! - [`eval`]: accuracy reporting, gap-closed summaries, and aggregation
//!   across datasets.

pub mod calibration;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod oracle;
pub mod scores;
pub mod synthetic;
pub mod verdict;

pub use error::{CoreError, Result};
pub use scores::{ClassMarginals, LabeledScores, ScoreSet};
pub use verdict::{CheckResult, CheckStatus, VerdictReport};
