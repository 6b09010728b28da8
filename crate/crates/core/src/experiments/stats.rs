//! Effect sizes, p-values, per-cell aggregation and data savings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::RunResult;
use crate::classifiers::ClassifierKind;
use crate::error::{Error, Result};
use crate::featuregen::GeneratorKind;

/// `fd = (μ1 − μ2) / (0.5 · (σ1 + σ2))`
pub fn fisher_discriminant(mu1: f64, sigma1: f64, mu2: f64, sigma2: f64) -> Result<f64> {
    let spread = 0.5 * (sigma1 + sigma2);
    if spread.is_nan() || spread <= 0.0 {
        return Err(Error::Degenerate(format!(
            "fisher discriminant needs positive spread, got sigmas {sigma1} and {sigma2}"
        )));
    }
    Ok((mu1 - mu2) / spread)
}

/// Two-sided normal tail, `p = 2 · (1 − Φ(|fd|))`. Infinite `fd` maps to 0.
pub fn fd_to_pvalue(fd: f64) -> f64 {
    let normal = Normal::standard();
    // sf is accurate in the far tail where 1 - cdf cancels
    (2.0 * normal.sf(fd.abs())).clamp(0.0, 1.0)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1); 0 for a single value.
fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Summary of one (N, classifier, generator) cell over its repetitions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub n: usize,
    pub classifier: ClassifierKind,
    pub generator: GeneratorKind,
    pub repetitions: usize,
    pub baseline_mean: f64,
    pub baseline_std: f64,
    pub treated_mean: f64,
    pub treated_std: f64,
    /// Δμ = treated − baseline
    pub raw_gain: f64,
    /// Δμ / μ_base; absent when the baseline mean is 0.
    pub relative_gain: Option<f64>,
    /// (ε_base − ε_treated) / ε_base; absent when the baseline is perfect.
    pub error_reduction: Option<f64>,
    /// Treated vs baseline. Absent when both spreads are zero and the means
    /// differ (complete separation).
    pub fd: Option<f64>,
    pub p_value: f64,
    pub mothnet_mean: Option<f64>,
}

impl AggregateRow {
    fn from_runs(runs: &[&RunResult]) -> Self {
        let first = runs[0];
        let baseline: Vec<f64> = runs.iter().map(|r| r.baseline_accuracy).collect();
        let treated: Vec<f64> = runs.iter().map(|r| r.treated_accuracy).collect();
        let (bm, bs, tm, ts) = (
            mean(&baseline),
            sample_std(&baseline),
            mean(&treated),
            sample_std(&treated),
        );
        let raw_gain = tm - bm;
        let (fd, p_value) = match fisher_discriminant(tm, ts, bm, bs) {
            Ok(fd) => (Some(fd), fd_to_pvalue(fd)),
            Err(_) if tm == bm => (Some(0.0), 1.0),
            Err(_) => (None, 0.0),
        };
        let moth: Vec<f64> = runs.iter().filter_map(|r| r.mothnet_accuracy).collect();
        Self {
            n: first.n,
            classifier: first.classifier,
            generator: first.generator,
            repetitions: runs.len(),
            baseline_mean: bm,
            baseline_std: bs,
            treated_mean: tm,
            treated_std: ts,
            raw_gain,
            relative_gain: (bm > 0.0).then(|| raw_gain / bm),
            error_reduction: (bm < 1.0).then(|| ((1.0 - bm) - (1.0 - tm)) / (1.0 - bm)),
            fd,
            p_value,
            mothnet_mean: (moth.len() == runs.len()).then(|| mean(&moth)),
        }
    }
}

/// One row per (N, classifier, generator) present in `results`, ordered by
/// N, then classifier, then generator. Repetitions are taken in index
/// order, so the output does not depend on the order of `results`.
pub fn aggregate(results: &[RunResult]) -> Vec<AggregateRow> {
    let mut cells: BTreeMap<(usize, ClassifierKind, GeneratorKind), Vec<&RunResult>> =
        BTreeMap::new();
    for r in results {
        cells
            .entry((r.n, r.classifier, r.generator))
            .or_default()
            .push(r);
    }
    cells
        .into_values()
        .map(|mut runs| {
            runs.sort_by_key(|r| r.repetition);
            AggregateRow::from_runs(&runs)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Savings {
    pub n: usize,
    pub cyborg_accuracy: f64,
    /// Training samples per class the baseline needs to match the cyborg.
    pub equivalent_n: f64,
    /// `equivalent_n / n`
    pub factor: f64,
    /// The baseline never reached the cyborg; `factor` is `max(N) / n`, a
    /// lower bound.
    pub lower_bound: bool,
}

/// Savings factors of `generator` over the `classifier` baseline, read off
/// the linearly interpolated baseline accuracy-vs-N curve. The baseline is
/// not extrapolated below the smallest N.
pub fn data_savings(
    agg: &[AggregateRow],
    classifier: ClassifierKind,
    generator: GeneratorKind,
) -> Vec<Savings> {
    let mut rows: Vec<&AggregateRow> = agg
        .iter()
        .filter(|r| r.classifier == classifier && r.generator == generator)
        .collect();
    rows.sort_by_key(|r| r.n);
    let curve: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.baseline_mean)).collect();
    let Some(&(max_n, _)) = curve.last() else {
        return Vec::new();
    };
    rows.iter()
        .map(|r| {
            let target = r.treated_mean;
            let crossing = curve.iter().position(|&(_, b)| b >= target);
            let (equivalent_n, lower_bound) = match crossing {
                None => (max_n, true),
                Some(0) => (curve[0].0, false),
                Some(j) => {
                    let ((n0, b0), (n1, b1)) = (curve[j - 1], curve[j]);
                    (n0 + (target - b0) / (b1 - b0) * (n1 - n0), false)
                }
            };
            Savings {
                n: r.n,
                cyborg_accuracy: target,
                equivalent_n,
                factor: equivalent_n / r.n as f64,
                lower_bound,
            }
        })
        .collect()
}
