//! `fit-temperature`: confidence-matching temperature fit on one score
//! file.

use std::path::PathBuf;

use calens_core::calibration::{average_confidence, fit_temperature, fit_temperature_to_target};
use calens_core::scores::accuracy;
use calens_core::LabeledScores;
use clap::Args;
use serde::Serialize;

use crate::config::SCHEMA_VERSION;
use crate::error::CliResult;
use crate::scorefile::read_scores;

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Score CSV; a label column is required unless --target is given.
    #[arg(long)]
    pub scores: PathBuf,

    /// Target mean confidence in [0, 1); defaults to the file's accuracy.
    #[arg(long)]
    pub target: Option<f64>,

    /// Tolerance on the confidence gap at convergence.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Serialize)]
struct FitOutput {
    schema_version: u32,
    kind: &'static str,
    rows: usize,
    target_confidence: f64,
    target_source: &'static str,
    temperature: f64,
    clamped: bool,
    achieved_confidence: f64,
}

pub fn run(args: &FitArgs) -> CliResult<i32> {
    let file = read_scores(&args.scores)?;
    let (fit, target, source) = match args.target {
        Some(t) => (
            fit_temperature_to_target(&file.scores, t, args.tol)?,
            t,
            "explicit",
        ),
        None => {
            let labels = file.require_labels(&args.scores)?.to_vec();
            let d = LabeledScores::new(file.scores.clone(), labels)?;
            let acc = accuracy(&d)?;
            (fit_temperature(&d, args.tol)?, acc, "accuracy")
        }
    };
    if fit.clamped {
        eprintln!("note: the target confidence is unreachable; the temperature was clamped");
    }
    let out = FitOutput {
        schema_version: SCHEMA_VERSION,
        kind: "temperature-fit",
        rows: file.scores.row_count(),
        target_confidence: target,
        target_source: source,
        temperature: fit.t,
        clamped: fit.clamped,
        achieved_confidence: average_confidence(&file.scores, fit.t)?,
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(0)
}
