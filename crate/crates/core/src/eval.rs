//! Accuracy evaluation and benchmark-table aggregation for model pairs
//! and their ensembles.
//!
//! Accuracies are reported in percent. The gap-closed statistic
//! normalizes the ensemble's position between the weaker and the stronger
//! of the two base models, so it does not depend on which model is passed
//! as which.

use serde::{Deserialize, Serialize};

use crate::ensemble::{combine, EnsembleConfig};
use crate::error::{CoreError, Result};
use crate::scores::{self, ScoreSet};

/// Two models' identically ordered accuracies are indistinguishable below
/// this gap; the gap-closed fraction is then undefined.
pub const GAP_DEGENERACY_TOL: f64 = 1e-9;

/// Aligned scores from both models on one test set, with labels and
/// optional group annotations for worst-group accuracy.
#[derive(Debug, Clone)]
pub struct PairedTestSet {
    pub std: ScoreSet,
    pub rob: ScoreSet,
    pub labels: Vec<usize>,
    pub groups: Option<Vec<usize>>,
}

impl PairedTestSet {
    pub fn new(
        std: ScoreSet,
        rob: ScoreSet,
        labels: Vec<usize>,
        groups: Option<Vec<usize>>,
    ) -> Result<Self> {
        if std.row_count() != rob.row_count() || std.class_count() != rob.class_count() {
            return Err(CoreError::misaligned(format!(
                "standard scores are {}x{}, robust scores are {}x{}",
                std.row_count(),
                std.class_count(),
                rob.row_count(),
                rob.class_count()
            )));
        }
        if std.row_count() == 0 {
            return Err(CoreError::empty("paired test set"));
        }
        if labels.len() != std.row_count() {
            return Err(CoreError::misaligned(format!(
                "{} labels for {} score rows",
                labels.len(),
                std.row_count()
            )));
        }
        for (row, &label) in labels.iter().enumerate() {
            if label >= std.class_count() {
                return Err(CoreError::LabelOutOfRange {
                    row,
                    label,
                    class_count: std.class_count(),
                });
            }
        }
        if let Some(g) = &groups {
            if g.len() != labels.len() {
                return Err(CoreError::misaligned(format!(
                    "{} group annotations for {} rows",
                    g.len(),
                    labels.len()
                )));
            }
        }
        Ok(PairedTestSet {
            std,
            rob,
            labels,
            groups,
        })
    }

    pub fn row_count(&self) -> usize {
        self.labels.len()
    }
}

/// What to evaluate on a paired test set.
#[derive(Debug, Clone)]
pub enum EvalModel {
    Standard,
    Robust,
    Ensemble(EnsembleConfig),
}

#[derive(Debug, Clone)]
pub struct NamedModel {
    pub name: String,
    pub model: EvalModel,
}

impl NamedModel {
    pub fn new(name: impl Into<String>, model: EvalModel) -> Self {
        NamedModel {
            name: name.into(),
            model,
        }
    }
}

/// One model's accuracies on one dataset, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub model_name: String,
    pub id_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ood_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id_worst_group: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ood_worst_group: Option<f64>,
}

fn predictions(model: &EvalModel, set: &PairedTestSet) -> Result<Vec<usize>> {
    match model {
        EvalModel::Standard => Ok(scores::predict(&set.std)),
        EvalModel::Robust => Ok(scores::predict(&set.rob)),
        EvalModel::Ensemble(cfg) => Ok(scores::predict(&combine(&set.std, &set.rob, cfg)?)),
    }
}

fn accuracy_percent(preds: &[usize], labels: &[usize]) -> Result<f64> {
    Ok(100.0 * scores::accuracy_of(preds, labels)?)
}

/// Minimum accuracy over the (label, group) cells present in the set,
/// in percent. `None` when the set has no group annotations.
fn worst_group_percent(preds: &[usize], set: &PairedTestSet) -> Option<f64> {
    let groups = set.groups.as_ref()?;
    let mut worst: Option<f64> = None;
    let mut seen = std::collections::BTreeSet::new();
    for i in 0..preds.len() {
        let cell = (set.labels[i], groups[i]);
        if !seen.insert(cell) {
            continue;
        }
        let mut total = 0usize;
        let mut correct = 0usize;
        for j in 0..preds.len() {
            if set.labels[j] == cell.0 && groups[j] == cell.1 {
                total += 1;
                correct += (preds[j] == set.labels[j]) as usize;
            }
        }
        let acc = 100.0 * correct as f64 / total as f64;
        worst = Some(match worst {
            Some(w) => w.min(acc),
            None => acc,
        });
    }
    worst
}

/// Evaluates each model on the ID set and, when given, the OOD set.
pub fn evaluate_models(
    models: &[NamedModel],
    id_test: &PairedTestSet,
    ood_test: Option<&PairedTestSet>,
) -> Result<Vec<EvalRow>> {
    if models.is_empty() {
        return Err(CoreError::empty("model list"));
    }
    let mut rows = Vec::with_capacity(models.len());
    for nm in models {
        let id_preds = predictions(&nm.model, id_test)?;
        let (ood_accuracy, ood_worst_group) = match ood_test {
            Some(set) => {
                let preds = predictions(&nm.model, set)?;
                (
                    Some(accuracy_percent(&preds, &set.labels)?),
                    worst_group_percent(&preds, set),
                )
            }
            None => (None, None),
        };
        rows.push(EvalRow {
            model_name: nm.name.clone(),
            id_accuracy: accuracy_percent(&id_preds, &id_test.labels)?,
            ood_accuracy,
            id_worst_group: worst_group_percent(&id_preds, id_test),
            ood_worst_group,
        });
    }
    Ok(rows)
}

/// Where the ensemble's accuracy sits between the two base models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapClosed {
    /// 0 matches the weaker model, 1 the stronger; values outside [0, 1]
    /// mean the ensemble fell outside the bracket. NaN when degenerate.
    pub fraction: f64,
    /// True when the two base models are too close to define a gap.
    pub degenerate: bool,
}

/// Fraction of the weaker-to-stronger accuracy gap covered by the
/// ensemble. Symmetric in the first two arguments.
pub fn gap_closed(std_accuracy: f64, rob_accuracy: f64, ens_accuracy: f64) -> GapClosed {
    let lo = std_accuracy.min(rob_accuracy);
    let hi = std_accuracy.max(rob_accuracy);
    if hi - lo < GAP_DEGENERACY_TOL {
        return GapClosed {
            fraction: f64::NAN,
            degenerate: true,
        };
    }
    GapClosed {
        fraction: (ens_accuracy - lo) / (hi - lo),
        degenerate: false,
    }
}

/// Benchmark flavor, recorded for reporting only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetTag {
    Natural,
    Adversarial,
}

/// One dataset's evaluation rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetEval {
    pub dataset: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tag: Option<DatasetTag>,
    pub rows: Vec<EvalRow>,
}

/// Per-model unweighted means across datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAverage {
    pub model_name: String,
    pub dataset_count: usize,
    pub mean_id_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_ood_accuracy: Option<f64>,
}

/// Averages each model's accuracies across datasets, unweighted. Datasets
/// are summed in name order so the result does not depend on input order;
/// models appear in first-occurrence order.
pub fn aggregate(evals: &[DatasetEval]) -> Result<Vec<ModelAverage>> {
    if evals.is_empty() {
        return Err(CoreError::empty("no dataset evaluations to aggregate"));
    }
    let mut sorted: Vec<&DatasetEval> = evals.iter().collect();
    sorted.sort_by(|a, b| a.dataset.cmp(&b.dataset));

    let mut order: Vec<String> = Vec::new();
    for eval in evals {
        for row in &eval.rows {
            if !order.contains(&row.model_name) {
                order.push(row.model_name.clone());
            }
        }
    }

    let mut out = Vec::with_capacity(order.len());
    for name in order {
        let mut id_sum = 0.0;
        let mut id_n = 0usize;
        let mut ood_sum = 0.0;
        let mut ood_n = 0usize;
        for eval in &sorted {
            for row in &eval.rows {
                if row.model_name != name {
                    continue;
                }
                id_sum += row.id_accuracy;
                id_n += 1;
                if let Some(a) = row.ood_accuracy {
                    ood_sum += a;
                    ood_n += 1;
                }
            }
        }
        if id_n == 0 {
            continue;
        }
        out.push(ModelAverage {
            model_name: name,
            dataset_count: id_n,
            mean_id_accuracy: id_sum / id_n as f64,
            mean_ood_accuracy: if ood_n > 0 {
                Some(ood_sum / ood_n as f64)
            } else {
                None
            },
        });
    }
    Ok(out)
}
