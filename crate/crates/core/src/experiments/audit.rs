//! Leakage audit: every fit the runner performs is logged with the row ids
//! it saw, alongside each (N, repetition)'s test rows, so a suite can be
//! checked after the fact.

use std::collections::{BTreeMap, HashSet};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::RunResult;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStage {
    Baseline,
    Generator,
    Rescaler,
    Treated,
    PretrainSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub n: usize,
    pub repetition: usize,
    pub stage: FitStage,
    pub label: String,
    pub row_ids: Vec<u64>,
}

#[derive(Default)]
struct Records {
    fits: Vec<FitRecord>,
    tests: BTreeMap<(usize, usize), Vec<u64>>,
}

#[derive(Default)]
pub struct AuditLog {
    records: Mutex<Records>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub fits_checked: usize,
    pub pairs_checked: usize,
    pub violations: Vec<String>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl AuditLog {
    pub fn new() -> Self {
        Self::default()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Records> {
        self.records.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub(crate) fn test_rows(&self, n: usize, repetition: usize, row_ids: &[u64]) {
        self.lock().tests.insert((n, repetition), row_ids.to_vec());
    }

    pub(crate) fn fit(
        &self,
        n: usize,
        repetition: usize,
        stage: FitStage,
        label: String,
        row_ids: &[u64],
    ) {
        self.lock().fits.push(FitRecord {
            n,
            repetition,
            stage,
            label,
            row_ids: row_ids.to_vec(),
        });
    }

    pub fn fits(&self) -> Vec<FitRecord> {
        self.lock().fits.clone()
    }

    /// Checks that no fit saw a test row of its own (N, repetition) and that
    /// every baseline/treated pair in `results` shares its split hashes.
    pub fn check(&self, results: &[RunResult]) -> AuditReport {
        let records = self.lock();
        let mut report = AuditReport::default();
        let tests: BTreeMap<_, HashSet<u64>> = records
            .tests
            .iter()
            .map(|(k, ids)| (*k, ids.iter().copied().collect()))
            .collect();
        for fit in &records.fits {
            report.fits_checked += 1;
            let Some(test) = tests.get(&(fit.n, fit.repetition)) else {
                report.violations.push(format!(
                    "N={} rep={} {}: fit without a recorded test split",
                    fit.n, fit.repetition, fit.label
                ));
                continue;
            };
            let leaked = fit.row_ids.iter().filter(|id| test.contains(id)).count();
            if leaked > 0 {
                report.violations.push(format!(
                    "N={} rep={} {:?} {}: {leaked} test rows in the fit set",
                    fit.n, fit.repetition, fit.stage, fit.label
                ));
            }
        }
        for r in results {
            report.pairs_checked += 1;
            if r.baseline_train_hash != r.treated_train_hash
                || r.baseline_test_hash != r.treated_test_hash
            {
                report.violations.push(format!(
                    "N={} rep={} {}/{}: baseline and treated splits differ",
                    r.n, r.repetition, r.classifier, r.generator
                ));
            }
        }
        report
    }
}
