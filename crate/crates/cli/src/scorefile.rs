//! Score-file I/O.
//!
//! A score file is a CSV with header `score_0,...,score_{K-1}` followed
//! optionally by `label` and then optionally by `group`. Scores are
//! written in shortest round-trip form, so a write/read cycle is exact.

use std::path::Path;

use calens_core::synthetic::SampledShiftSet;
use calens_core::ScoreSet;

use crate::error::{CliError, CliResult};

pub struct ScoreFile {
    pub scores: ScoreSet,
    pub labels: Option<Vec<usize>>,
    pub groups: Option<Vec<usize>>,
}

impl ScoreFile {
    /// Labels, or a format error naming the file that lacks them.
    pub fn require_labels(&self, path: &Path) -> CliResult<&[usize]> {
        self.labels.as_deref().ok_or_else(|| {
            CliError::format(format!("{} has no label column", path.display()))
        })
    }
}

pub fn read_scores(path: &Path) -> CliResult<ScoreFile> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::format(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers()?.clone();

    let mut k = 0;
    while k < headers.len() && headers[k] == format!("score_{k}") {
        k += 1;
    }
    if k == 0 {
        return Err(CliError::format(format!(
            "{}: the first column must be score_0, found `{}`",
            path.display(),
            headers.get(0).unwrap_or("")
        )));
    }
    let mut idx = k;
    let mut label_col = None;
    let mut group_col = None;
    if idx < headers.len() && &headers[idx] == "label" {
        label_col = Some(idx);
        idx += 1;
    }
    if idx < headers.len() && &headers[idx] == "group" {
        group_col = Some(idx);
        idx += 1;
    }
    if idx != headers.len() {
        return Err(CliError::format(format!(
            "{}: unexpected column `{}`",
            path.display(),
            &headers[idx]
        )));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut groups: Vec<usize> = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(CliError::format(format!(
                "{}: row {} has {} fields, header has {}",
                path.display(),
                line + 1,
                record.len(),
                headers.len()
            )));
        }
        let parse_f64 = |j: usize| -> CliResult<f64> {
            record[j].trim().parse::<f64>().map_err(|_| {
                CliError::format(format!(
                    "{}: row {}, column {}: `{}` is not a number",
                    path.display(),
                    line + 1,
                    &headers[j],
                    &record[j]
                ))
            })
        };
        let parse_usize = |j: usize| -> CliResult<usize> {
            record[j].trim().parse::<usize>().map_err(|_| {
                CliError::format(format!(
                    "{}: row {}, column {}: `{}` is not a nonnegative integer",
                    path.display(),
                    line + 1,
                    &headers[j],
                    &record[j]
                ))
            })
        };
        let mut row = Vec::with_capacity(k);
        for j in 0..k {
            row.push(parse_f64(j)?);
        }
        rows.push(row);
        if let Some(j) = label_col {
            labels.push(parse_usize(j)?);
        }
        if let Some(j) = group_col {
            groups.push(parse_usize(j)?);
        }
    }

    if rows.is_empty() {
        return Err(CliError::Core(calens_core::CoreError::EmptyInput {
            context: format!("{} contains a header but no rows", path.display()),
        }));
    }
    Ok(ScoreFile {
        scores: ScoreSet::from_rows(&rows)?,
        labels: label_col.map(|_| labels),
        groups: group_col.map(|_| groups),
    })
}

pub fn write_scores(
    path: &Path,
    scores: &ScoreSet,
    labels: Option<&[usize]>,
    groups: Option<&[usize]>,
) -> CliResult<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..scores.class_count()).map(|j| format!("score_{j}")).collect();
    if labels.is_some() {
        header.push("label".to_string());
    }
    if groups.is_some() {
        header.push("group".to_string());
    }
    wtr.write_record(&header)?;
    for i in 0..scores.row_count() {
        let mut record: Vec<String> = scores.row(i).iter().map(|v| format!("{v}")).collect();
        if let Some(l) = labels {
            record.push(format!("{}", l[i]));
        }
        if let Some(g) = groups {
            record.push(format!("{}", g[i]));
        }
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Sidecar with per-row shift provenance and the exact conditional the
/// label was drawn from.
pub fn write_conditionals(path: &Path, set: &SampledShiftSet) -> CliResult<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    let k = set.class_count();
    let mut header = vec!["kind".to_string()];
    header.extend((0..k).map(|j| format!("cond_{j}")));
    wtr.write_record(&header)?;
    for (i, kind) in set.row_kinds.iter().enumerate() {
        let mut record = vec![kind.to_string()];
        record.extend(set.exact_conditionals.row(i).iter().map(|v| format!("{v}")));
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}
