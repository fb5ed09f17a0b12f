//! Machine-readable evidence from verification suites.
//!
//! Every suite returns a [`VerdictReport`]: a named list of checks, each
//! passing, failing (with the first violating row or cell identified), or
//! skipped (with the reason). A report passes when nothing failed.

use std::collections::BTreeMap;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub status: CheckStatus,
    /// Margins, counts, and other numeric evidence, keyed by name.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, f64>,
    /// For failures: the first row or cell that violated the check.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_violation: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckResult {
    pub fn pass(name: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            status: CheckStatus::Pass,
            metrics: BTreeMap::new(),
            first_violation: None,
            note: None,
        }
    }

    pub fn fail(name: impl Into<String>, first_violation: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            status: CheckStatus::Fail,
            metrics: BTreeMap::new(),
            first_violation: Some(first_violation.into()),
            note: None,
        }
    }

    pub fn skipped(name: impl Into<String>, why: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            status: CheckStatus::Skipped,
            metrics: BTreeMap::new(),
            first_violation: None,
            note: Some(why.into()),
        }
    }

    pub fn metric(mut self, key: impl Into<String>, value: f64) -> Self {
        self.metrics.insert(key.into(), value);
        self
    }

    pub fn noted(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictReport {
    /// What was verified, e.g. `proposition-1` or `lemma-softmax`.
    pub subject: String,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl VerdictReport {
    pub fn new(subject: impl Into<String>) -> Self {
        VerdictReport {
            subject: subject.into(),
            passed: true,
            checks: Vec::new(),
        }
    }

    pub fn push(&mut self, check: CheckResult) {
        if check.status == CheckStatus::Fail {
            self.passed = false;
        }
        self.checks.push(check);
    }

    pub fn first_failure(&self) -> Option<&CheckResult> {
        self.checks
            .iter()
            .find(|c| c.status == CheckStatus::Fail)
    }
}
