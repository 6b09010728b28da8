//! Suite artifacts: the per-run log, aggregate tables, N-column tables in
//! the layout of the published results, plot-ready curves and a manifest.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::audit::AuditReport;
use super::runner::{CellError, RunResult, SuiteOutput};
use super::stats::{data_savings, AggregateRow};
use super::ExperimentConfig;
use crate::classifiers::ClassifierKind;
use crate::error::{Error, Result};
use crate::featuregen::GeneratorKind;

pub const RUNS_CSV: &str = "runs.csv";
pub const ERRORS_CSV: &str = "errors.csv";
pub const AGGREGATE_CSV: &str = "aggregate.csv";
pub const AGGREGATE_JSON: &str = "aggregate.json";
pub const MANIFEST_JSON: &str = "manifest.json";

/// Marker for table cells with no data.
pub const GAP: &str = "NA";

/// Fixed settings echoed into every manifest.
pub const DECISIONS: &[&str] = &[
    "split seed = hash(master, N, rep); generator seed adds the generator; classifier seed adds classifier and generator",
    "baseline classifier seed equals the `none` generator's treated seed",
    "generated features are min-max rescaled on the training split and clamped on test",
    "p = 2 (1 - Phi(|fd|)) with fd = (mu_t - mu_b) / (0.5 (sigma_t + sigma_b)), sample std",
    "MothNet features are evaluated noise-free",
    "pretrain applies to the mlp only",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub decisions: Vec<String>,
    pub n_results: usize,
    pub errors: Vec<CellError>,
    pub audit: Option<AuditReport>,
    pub files: Vec<String>,
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(!rows.is_empty())
        .from_path(path)?;
    if rows.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_table(path: &Path, header: Vec<String>, rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_runs(path: &Path, results: &[RunResult]) -> Result<()> {
    write_rows(
        path,
        results,
        &[
            "n",
            "classifier",
            "generator",
            "repetition",
            "baseline_accuracy",
            "treated_accuracy",
        ],
    )
}

pub fn write_aggregate(dir: &Path, agg: &[AggregateRow]) -> Result<()> {
    write_rows(
        &dir.join(AGGREGATE_CSV),
        agg,
        &["n", "classifier", "generator", "repetitions"],
    )?;
    write_json(&dir.join(AGGREGATE_JSON), agg)
}

pub fn read_aggregate(dir: &Path) -> Result<Vec<AggregateRow>> {
    let path = dir.join(AGGREGATE_JSON);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_JSON);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn n_columns(agg: &[AggregateRow]) -> Vec<usize> {
    agg.iter()
        .map(|r| r.n)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn pairs(agg: &[AggregateRow]) -> Vec<(ClassifierKind, GeneratorKind)> {
    agg.iter()
        .map(|r| (r.classifier, r.generator))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn cell(
    agg: &[AggregateRow],
    n: usize,
    c: ClassifierKind,
    g: GeneratorKind,
) -> Option<&AggregateRow> {
    agg.iter()
        .find(|r| r.n == n && r.classifier == c && r.generator == g)
}

/// Rows per (classifier, generator), one column per N, `value` per cell.
fn wide_table(
    agg: &[AggregateRow],
    value: impl Fn(&AggregateRow) -> Option<String>,
) -> (Vec<String>, Vec<Vec<String>>) {
    let ns = n_columns(agg);
    let mut header = vec!["classifier".to_string(), "generator".to_string()];
    header.extend(ns.iter().map(|n| format!("N={n}")));
    let rows = pairs(agg)
        .into_iter()
        .map(|(c, g)| {
            let mut row = vec![c.to_string(), g.to_string()];
            row.extend(ns.iter().map(|&n| {
                cell(agg, n, c, g)
                    .and_then(&value)
                    .unwrap_or_else(|| GAP.to_string())
            }));
            row
        })
        .collect();
    (header, rows)
}

/// Pass-through gains as a percentage of full-AL gains, per classifier.
pub fn mutant_ratios(agg: &[AggregateRow]) -> Vec<(ClassifierKind, usize, Option<f64>)> {
    let mut out = Vec::new();
    for n in n_columns(agg) {
        for c in ClassifierKind::ALL {
            let full = cell(agg, n, c, GeneratorKind::MothNet);
            let pass = cell(agg, n, c, GeneratorKind::MothNetPassThrough);
            if let (Some(f), Some(p)) = (full, pass) {
                let ratio = (f.raw_gain != 0.0).then(|| 100.0 * p.raw_gain / f.raw_gain);
                out.push((c, n, ratio));
            }
        }
    }
    out
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| GAP.to_string(), |x| format!("{x:.digits$}"))
}

/// Derived tables and plot-ready curves. Returns the files written.
pub fn write_tables(dir: &Path, agg: &[AggregateRow]) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let mut files = Vec::new();
    let mut emit = |name: &str, (header, rows): (Vec<String>, Vec<Vec<String>>)| -> Result<()> {
        let path = dir.join(name);
        write_table(&path, header, rows)?;
        files.push(path);
        Ok(())
    };

    emit(
        "table_pvalues.csv",
        wide_table(agg, |r| Some(format!("{:.2}", r.p_value))),
    )?;
    emit(
        "table_relative_gain_pct.csv",
        wide_table(agg, |r| {
            r.relative_gain.map(|g| format!("{:.1}", 100.0 * g))
        }),
    )?;
    emit(
        "table_error_reduction_pct.csv",
        wide_table(agg, |r| {
            r.error_reduction.map(|g| format!("{:.1}", 100.0 * g))
        }),
    )?;

    let ratios = mutant_ratios(agg);
    if !ratios.is_empty() {
        let ns: Vec<usize> = ratios
            .iter()
            .map(|r| r.1)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut header = vec!["classifier".to_string()];
        header.extend(ns.iter().map(|n| format!("N={n}")));
        let rows = ClassifierKind::ALL
            .iter()
            .filter(|c| ratios.iter().any(|r| r.0 == **c))
            .map(|&c| {
                let mut row = vec![c.to_string()];
                row.extend(ns.iter().map(|&n| {
                    let v = ratios
                        .iter()
                        .find(|r| r.0 == c && r.1 == n)
                        .and_then(|r| r.2);
                    fmt_opt(v, 0)
                }));
                row
            })
            .collect();
        emit("table_mutant_pct_of_full.csv", (header, rows))?;
    }

    let header = ["n", "classifier", "series", "mean", "std"]
        .map(String::from)
        .to_vec();
    let mut rows = Vec::new();
    let mut baseline_done = BTreeSet::new();
    for (c, g) in pairs(agg) {
        for r in agg.iter().filter(|r| r.classifier == c && r.generator == g) {
            // baselines are shared by every generator of a classifier
            if baseline_done.insert((c, r.n)) {
                rows.push(vec![
                    r.n.to_string(),
                    c.to_string(),
                    "baseline".into(),
                    r.baseline_mean.to_string(),
                    r.baseline_std.to_string(),
                ]);
            }
            rows.push(vec![
                r.n.to_string(),
                c.to_string(),
                g.to_string(),
                r.treated_mean.to_string(),
                r.treated_std.to_string(),
            ]);
        }
    }
    emit("curves_accuracy.csv", (header, rows))?;

    let header = [
        "n",
        "classifier",
        "generator",
        "raw_gain",
        "relative_gain",
        "error_reduction",
    ]
    .map(String::from)
    .to_vec();
    let rows = agg
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.classifier.to_string(),
                r.generator.to_string(),
                r.raw_gain.to_string(),
                r.relative_gain.map_or_else(String::new, |v| v.to_string()),
                r.error_reduction
                    .map_or_else(String::new, |v| v.to_string()),
            ]
        })
        .collect();
    emit("curves_gain.csv", (header, rows))?;

    let header = [
        "classifier",
        "generator",
        "n",
        "cyborg_accuracy",
        "equivalent_n",
        "factor",
        "lower_bound",
    ]
    .map(String::from)
    .to_vec();
    let mut rows = Vec::new();
    for (c, g) in pairs(agg)
        .into_iter()
        .filter(|p| p.1 != GeneratorKind::None)
    {
        for s in data_savings(agg, c, g) {
            rows.push(vec![
                c.to_string(),
                g.to_string(),
                s.n.to_string(),
                s.cyborg_accuracy.to_string(),
                s.equivalent_n.to_string(),
                s.factor.to_string(),
                s.lower_bound.to_string(),
            ]);
        }
    }
    emit("savings.csv", (header, rows))?;
    Ok(files)
}

/// Writes every artifact of a suite under `dir`.
pub fn write_suite(
    dir: &Path,
    cfg: &ExperimentConfig,
    output: &SuiteOutput,
    audit: Option<AuditReport>,
) -> Result<Manifest> {
    create_dir(dir)?;
    write_runs(&dir.join(RUNS_CSV), &output.results)?;
    write_rows(
        &dir.join(ERRORS_CSV),
        &output.errors,
        &["n", "classifier", "generator", "repetition", "message"],
    )?;
    write_aggregate(dir, &output.aggregate)?;
    let mut files: Vec<String> = [RUNS_CSV, ERRORS_CSV, AGGREGATE_CSV, AGGREGATE_JSON]
        .map(String::from)
        .to_vec();
    for path in write_tables(dir, &output.aggregate)? {
        files.push(
            path.file_name()
                .map_or_else(String::new, |f| f.to_string_lossy().into_owned()),
        );
    }
    files.push(MANIFEST_JSON.into());
    let manifest = Manifest {
        tool: "mothnet".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.resolved(),
        decisions: DECISIONS.iter().map(|d| d.to_string()).collect(),
        n_results: output.results.len(),
        errors: output.errors.clone(),
        audit,
        files,
    };
    write_json(&dir.join(MANIFEST_JSON), &manifest)?;
    Ok(manifest)
}

/// Human-readable summary: per (classifier, generator) accuracy-vs-N
/// blocks and an N-column p-value table.
pub fn summary(agg: &[AggregateRow]) -> String {
    let mut s = String::new();
    for (c, g) in pairs(agg) {
        let savings = data_savings(agg, c, g);
        let _ = writeln!(s, "{c} + {g}");
        let _ = writeln!(
            s,
            "{:>5}  {:>13}  {:>13}  {:>7}  {:>7}  {:>7}  {:>5}  {:>7}",
            "N", "baseline", "cyborg", "gain", "rel %", "err %", "p", "savings"
        );
        for r in agg.iter().filter(|r| r.classifier == c && r.generator == g) {
            let saving = savings.iter().find(|x| x.n == r.n).map_or_else(
                || GAP.to_string(),
                |x| format!("{}{:.2}", if x.lower_bound { ">=" } else { "" }, x.factor),
            );
            let _ = writeln!(
                s,
                "{:>5}  {:.3} ± {:.3}  {:.3} ± {:.3}  {:>7.3}  {:>7}  {:>7}  {:>5.2}  {:>7}",
                r.n,
                r.baseline_mean,
                r.baseline_std,
                r.treated_mean,
                r.treated_std,
                r.raw_gain,
                fmt_opt(r.relative_gain.map(|v| 100.0 * v), 1),
                fmt_opt(r.error_reduction.map(|v| 100.0 * v), 1),
                r.p_value,
                saving
            );
        }
        if let Some(m) = agg
            .iter()
            .filter(|r| r.classifier == c && r.generator == g)
            .map(|r| r.mothnet_mean)
            .collect::<Option<Vec<f64>>>()
        {
            let line: Vec<String> = m.iter().map(|v| format!("{v:.3}")).collect();
            let _ = writeln!(s, "  standalone MothNet: {}", line.join(" "));
        }
        s.push('\n');
    }
    let (header, rows) = wide_table(agg, |r| Some(format!("{:.2}", r.p_value)));
    let _ = writeln!(s, "p-values");
    let _ = writeln!(s, "{}", header.join("\t"));
    for row in rows {
        let _ = writeln!(s, "{}", row.join("\t"));
    }
    s
}
