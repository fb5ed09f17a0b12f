//! `ensemble`: fit a combination strategy on a validation pair, evaluate
//! it next to both base models, and emit a report JSON.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use calens_core::ensemble::{fit_strategy, EnsembleConfig, EnsembleStrategy};
use calens_core::eval::{
    evaluate_models, gap_closed, DatasetTag, EvalModel, EvalRow, GapClosed, NamedModel,
    PairedTestSet,
};
use calens_core::{CoreError, LabeledScores};
use clap::Args;
use serde::Serialize;

use crate::config::SCHEMA_VERSION;
use crate::error::{CliError, CliResult};
use crate::scorefile::read_scores;

#[derive(Args, Debug)]
pub struct EnsembleArgs {
    /// Standard-model scores on the ID evaluation set (labels required).
    #[arg(long)]
    pub std: PathBuf,

    /// Robust-model scores on the ID evaluation set (labels required).
    #[arg(long)]
    pub rob: PathBuf,

    /// Standard-model scores on the ID validation split used for fitting.
    #[arg(long)]
    pub id_val_std: Option<PathBuf>,

    /// Robust-model scores on the ID validation split used for fitting.
    #[arg(long)]
    pub id_val_rob: Option<PathBuf>,

    /// Combination strategy: logits, probs, tuned-logits, tuned-probs,
    /// calibrated-logits, calibrated-probs, calibrated-logits-marginal.
    #[arg(long, default_value = "calibrated-probs")]
    pub strategy: String,

    /// Replacement ID evaluation pair `STD.csv,ROB.csv`; defaults to
    /// --std/--rob.
    #[arg(long)]
    pub eval_id: Option<String>,

    /// OOD evaluation pair `STD.csv,ROB.csv`.
    #[arg(long)]
    pub eval_ood: Option<String>,

    /// Dataset name recorded in the report.
    #[arg(long, default_value = "default")]
    pub dataset: String,

    /// Dataset tag recorded in the report: natural|adversarial.
    #[arg(long)]
    pub tag: Option<String>,

    /// Also write the report JSON to this path.
    #[arg(long)]
    pub report: Option<PathBuf>,

    /// Tolerance for confidence-matching temperature fits.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Serialize)]
struct Provenance {
    strategy: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    temperature_std: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    temperature_std_clamped: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    temperature_rob: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    temperature_rob_clamped: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    marginals: Option<Vec<f64>>,
    confidence_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    validation_rows: Option<usize>,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct EnsembleReport {
    schema_version: u32,
    kind: &'static str,
    dataset: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    tag: Option<DatasetTag>,
    class_count: usize,
    provenance: Provenance,
    rows: Vec<EvalRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gap_closed_id: Option<GapClosed>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gap_closed_ood: Option<GapClosed>,
}

fn read_pair(std_path: &Path, rob_path: &Path) -> CliResult<PairedTestSet> {
    let sf = read_scores(std_path)?;
    let rf = read_scores(rob_path)?;
    let labels = sf.require_labels(std_path)?.to_vec();
    let rob_labels = rf.require_labels(rob_path)?;
    if labels != rob_labels {
        return Err(CliError::Core(CoreError::Misaligned {
            context: format!(
                "labels differ between {} and {}",
                std_path.display(),
                rob_path.display()
            ),
        }));
    }
    let groups = sf.groups.clone().or_else(|| rf.groups.clone());
    Ok(PairedTestSet::new(sf.scores, rf.scores, labels, groups)?)
}

fn split_pair(arg: &str, flag: &str) -> CliResult<(PathBuf, PathBuf)> {
    let (a, b) = arg.split_once(',').ok_or_else(|| {
        CliError::format(format!("{flag} expects `STD.csv,ROB.csv`, got `{arg}`"))
    })?;
    Ok((PathBuf::from(a.trim()), PathBuf::from(b.trim())))
}

pub fn run(args: &EnsembleArgs) -> CliResult<i32> {
    let strategy = EnsembleStrategy::from_str(&args.strategy)
        .map_err(|_| CliError::UnknownStrategy(args.strategy.clone()))?;
    let tag = match args.tag.as_deref() {
        None => None,
        Some("natural") => Some(DatasetTag::Natural),
        Some("adversarial") => Some(DatasetTag::Adversarial),
        Some(other) => {
            return Err(CliError::format(format!(
                "unknown --tag `{other}`; expected natural or adversarial"
            )))
        }
    };

    let id_eval = match &args.eval_id {
        Some(pair) => {
            let (s, r) = split_pair(pair, "--eval-id")?;
            read_pair(&s, &r)?
        }
        None => read_pair(&args.std, &args.rob)?,
    };
    let ood_eval = match &args.eval_ood {
        Some(pair) => {
            let (s, r) = split_pair(pair, "--eval-ood")?;
            Some(read_pair(&s, &r)?)
        }
        None => None,
    };

    let mut warnings = Vec::new();
    let needs_fit = strategy.is_tuned() || strategy.is_calibrated();
    let (config, validation_rows): (EnsembleConfig, Option<usize>) =
        match (&args.id_val_std, &args.id_val_rob) {
            (Some(s_path), Some(r_path)) => {
                let val = read_pair(s_path, r_path)?;
                let rows = val.row_count();
                let std_val = LabeledScores::new(val.std, val.labels.clone())?;
                let rob_val = LabeledScores::new(val.rob, val.labels)?;
                let fit = fit_strategy(&std_val, &rob_val, strategy, args.tol)?;
                if fit.few_validation_rows {
                    warnings.push(format!(
                        "validation split has only {rows} rows for {} classes; \
                         fitted parameters are coarse",
                        std_val.class_count()
                    ));
                }
                (fit.config, Some(rows))
            }
            (None, None) => {
                if needs_fit {
                    return Err(CliError::format(format!(
                        "strategy {strategy} needs --id-val-std and --id-val-rob to fit on"
                    )));
                }
                (EnsembleConfig::plain(strategy)?, None)
            }
            _ => {
                return Err(CliError::format(
                    "--id-val-std and --id-val-rob must be given together",
                ))
            }
        };

    if config.t_std.clamped || config.t_rob.clamped {
        warnings.push(
            "a fitted temperature hit its bound; the validation confidence target was \
             unreachable"
                .to_string(),
        );
    }

    let models = [
        NamedModel::new("standard", EvalModel::Standard),
        NamedModel::new("robust", EvalModel::Robust),
        NamedModel::new("ensemble", EvalModel::Ensemble(config.clone())),
    ];
    let rows = evaluate_models(&models, &id_eval, ood_eval.as_ref())?;

    let gap_closed_id = Some(gap_closed(
        rows[0].id_accuracy,
        rows[1].id_accuracy,
        rows[2].id_accuracy,
    ));
    let gap_closed_ood = match (
        rows[0].ood_accuracy,
        rows[1].ood_accuracy,
        rows[2].ood_accuracy,
    ) {
        (Some(s), Some(r), Some(e)) => Some(gap_closed(s, r, e)),
        _ => None,
    };

    let report = EnsembleReport {
        schema_version: SCHEMA_VERSION,
        kind: "ensemble-report",
        dataset: args.dataset.clone(),
        tag,
        class_count: id_eval.std.class_count(),
        provenance: Provenance {
            strategy: strategy.name().to_string(),
            temperature_std: strategy.is_calibrated().then_some(config.t_std.t),
            temperature_std_clamped: strategy.is_calibrated().then_some(config.t_std.clamped),
            temperature_rob: strategy.is_calibrated().then_some(config.t_rob.t),
            temperature_rob_clamped: strategy.is_calibrated().then_some(config.t_rob.clamped),
            alpha: strategy.is_tuned().then_some(config.alpha),
            marginals: config.marginals.as_ref().map(|m| m.probs()),
            confidence_tol: args.tol,
            validation_rows,
            warnings: warnings.clone(),
        },
        rows,
        gap_closed_id,
        gap_closed_ood,
    };

    let json = serde_json::to_string_pretty(&report)?;
    println!("{json}");
    if let Some(path) = &args.report {
        std::fs::write(path, format!("{json}\n"))?;
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    Ok(0)
}
