//! `report`: merge ensemble report JSONs into one comparison table.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use calens_core::eval::{aggregate, gap_closed, DatasetEval, DatasetTag, EvalRow, GapClosed};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::config::SCHEMA_VERSION;
use crate::error::{CliError, CliResult};

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Ensemble report JSONs to merge (one per dataset).
    #[arg(long, num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,

    /// Output format: json|markdown.
    #[arg(long, default_value = "json")]
    pub format: String,
}

#[derive(Deserialize)]
struct ReportIn {
    schema_version: u32,
    kind: String,
    dataset: String,
    #[serde(default)]
    tag: Option<DatasetTag>,
    class_count: usize,
    rows: Vec<EvalRow>,
}

#[derive(Serialize)]
struct MergedReport {
    schema_version: u32,
    kind: &'static str,
    class_count: usize,
    datasets: Vec<DatasetEval>,
    averages: Vec<calens_core::eval::ModelAverage>,
    /// Per-model position in the standard-to-robust gap, from mean
    /// accuracies; basis names which mean was used.
    gap_closed: BTreeMap<String, GapClosed>,
    gap_closed_basis: &'static str,
}

fn read_input(path: &Path) -> CliResult<ReportIn> {
    let text = std::fs::read_to_string(path)?;
    let input: ReportIn = serde_json::from_str(&text)
        .map_err(|e| CliError::format(format!("{}: {e}", path.display())))?;
    if input.schema_version != SCHEMA_VERSION {
        return Err(CliError::format(format!(
            "{}: schema_version {} is not supported (expected {SCHEMA_VERSION})",
            path.display(),
            input.schema_version
        )));
    }
    if input.kind != "ensemble-report" {
        return Err(CliError::format(format!(
            "{}: kind `{}` is not an ensemble report",
            path.display(),
            input.kind
        )));
    }
    Ok(input)
}

fn build_merged(inputs: &[ReportIn]) -> CliResult<MergedReport> {
    let class_count = inputs[0].class_count;
    for input in inputs {
        if input.class_count != class_count {
            return Err(CliError::format(format!(
                "class counts differ across inputs: {} vs {class_count}",
                input.class_count
            )));
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    for input in inputs {
        if !seen.insert(input.dataset.clone()) {
            return Err(CliError::format(format!(
                "dataset `{}` appears in more than one input",
                input.dataset
            )));
        }
    }

    let datasets: Vec<DatasetEval> = inputs
        .iter()
        .map(|i| DatasetEval {
            dataset: i.dataset.clone(),
            tag: i.tag,
            rows: i.rows.clone(),
        })
        .collect();
    let averages = aggregate(&datasets)?;

    let find = |name: &str| averages.iter().find(|a| a.model_name == name);
    let mut gaps = BTreeMap::new();
    let mut basis = "mean-id-accuracy";
    if let (Some(std), Some(rob)) = (find("standard"), find("robust")) {
        let use_ood = averages
            .iter()
            .all(|a| a.mean_ood_accuracy.is_some());
        if use_ood {
            basis = "mean-ood-accuracy";
        }
        for avg in &averages {
            if avg.model_name == "standard" || avg.model_name == "robust" {
                continue;
            }
            let g = if use_ood {
                gap_closed(
                    std.mean_ood_accuracy.expect("checked above"),
                    rob.mean_ood_accuracy.expect("checked above"),
                    avg.mean_ood_accuracy.expect("checked above"),
                )
            } else {
                gap_closed(std.mean_id_accuracy, rob.mean_id_accuracy, avg.mean_id_accuracy)
            };
            gaps.insert(avg.model_name.clone(), g);
        }
    }

    Ok(MergedReport {
        schema_version: SCHEMA_VERSION,
        kind: "merged-report",
        class_count,
        datasets,
        averages,
        gap_closed: gaps,
        gap_closed_basis: basis,
    })
}

fn fmt_acc(v: f64) -> String {
    format!("{v:.2}")
}

fn markdown(report: &MergedReport) -> String {
    let dataset_names: Vec<&str> = report.datasets.iter().map(|d| d.dataset.as_str()).collect();
    let ood_datasets: Vec<&str> = report
        .datasets
        .iter()
        .filter(|d| d.rows.iter().any(|r| r.ood_accuracy.is_some()))
        .map(|d| d.dataset.as_str())
        .collect();
    let any_ood_mean = report.averages.iter().any(|a| a.mean_ood_accuracy.is_some());

    let mut header = vec!["model".to_string()];
    header.extend(dataset_names.iter().map(|d| format!("{d} ID")));
    header.extend(ood_datasets.iter().map(|d| format!("{d} OOD")));
    header.push("mean ID".to_string());
    if any_ood_mean {
        header.push("mean OOD".to_string());
    }
    if !report.gap_closed.is_empty() {
        header.push("gap closed".to_string());
    }

    let mut lines = Vec::new();
    lines.push(format!("| {} |", header.join(" | ")));
    lines.push(format!("|{}|", vec!["---"; header.len()].join("|")));

    for avg in &report.averages {
        let cell = |dataset: &str, ood: bool| -> String {
            report
                .datasets
                .iter()
                .find(|d| d.dataset == dataset)
                .and_then(|d| d.rows.iter().find(|r| r.model_name == avg.model_name))
                .and_then(|r| {
                    if ood {
                        r.ood_accuracy.map(fmt_acc)
                    } else {
                        Some(fmt_acc(r.id_accuracy))
                    }
                })
                .unwrap_or_default()
        };
        let mut row = vec![avg.model_name.clone()];
        row.extend(dataset_names.iter().map(|d| cell(d, false)));
        row.extend(ood_datasets.iter().map(|d| cell(d, true)));
        row.push(fmt_acc(avg.mean_id_accuracy));
        if any_ood_mean {
            row.push(avg.mean_ood_accuracy.map(fmt_acc).unwrap_or_default());
        }
        if !report.gap_closed.is_empty() {
            row.push(
                report
                    .gap_closed
                    .get(&avg.model_name)
                    .map(|g| {
                        if g.degenerate {
                            "n/a".to_string()
                        } else {
                            format!("{:.3}", g.fraction)
                        }
                    })
                    .unwrap_or_default(),
            );
        }
        lines.push(format!("| {} |", row.join(" | ")));
    }
    lines.join("\n")
}

pub fn run(args: &ReportArgs) -> CliResult<i32> {
    let inputs: Vec<ReportIn> = args
        .inputs
        .iter()
        .map(|p| read_input(p))
        .collect::<CliResult<_>>()?;
    let merged = build_merged(&inputs)?;
    match args.format.as_str() {
        "json" => println!("{}", serde_json::to_string_pretty(&merged)?),
        "markdown" => println!("{}", markdown(&merged)),
        other => {
            return Err(CliError::format(format!(
                "unknown --format `{other}`; expected json or markdown"
            )))
        }
    }
    Ok(0)
}
