//! `mothnet`: dataset preparation, experiment suites and reports.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mothnet_core::experiments::data::{load_prepared, prepare_cache};
use mothnet_core::experiments::report::{self, AGGREGATE_JSON, MANIFEST_JSON};
use mothnet_core::experiments::{run_suite, AuditLog};
use mothnet_core::featuregen::GeneratorKind;
use mothnet_core::par::Execution;
use mothnet_core::selftest;

#[derive(Parser, Debug)]
#[command(
    name = "mothnet",
    version,
    about = "MothNet feature generator and cyborg experiment runner"
)]
struct Cli {
    /// More log output (-v debug, -vv trace).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// TOML file with [experiment] and [prep] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root holding mnist/ and the cache/ written by `prep`.
    #[arg(long, env = "MOTHNET_DATA_DIR", default_value = "data")]
    data_dir: PathBuf,
    /// Override a config value, e.g. `--set repetitions=5` or `--set mothnet.n_mb=1000`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Vectorise raw images into CSV caches and pixel masks.
    Prep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Cache directory (default: <data-dir>/cache).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Omniglot-style image tree; a stand-in is generated when absent.
        #[arg(long)]
        omniglot_dir: Option<PathBuf>,
    },
    /// Run an experiment suite and write its artifacts.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out_dir: PathBuf,
        /// Worker threads (1 = serial; default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Summarise the artifacts of a previous run and re-emit its tables.
    Report {
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the synthetic-fixture checks.
    Selftest,
}

fn cache_dir(data_dir: &Path) -> PathBuf {
    data_dir.join("cache")
}

fn prep(
    args: &ConfigArgs,
    out_dir: Option<PathBuf>,
    omniglot_dir: Option<PathBuf>,
) -> Result<ExitCode> {
    let mut cfg = config::load(args.config.as_deref(), &args.overrides)?;
    if let Some(seed) = args.seed {
        cfg.prep.seed = seed;
    }
    if omniglot_dir.is_some() {
        cfg.prep.omniglot_dir = omniglot_dir;
    }
    let out = out_dir.unwrap_or_else(|| cache_dir(&args.data_dir));
    let summary = prepare_cache(&args.data_dir.join("mnist"), &out, &cfg.prep)?;
    for c in &summary.caches {
        println!(
            "{}: {} rows x {} features, {} classes",
            out.join(&c.file).display(),
            c.rows,
            c.features,
            c.classes
        );
    }
    if summary.omniglot_is_surrogate {
        println!(
            "vomniglot built from the generated stand-in tree at {}",
            summary.omniglot_source
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn run(args: &ConfigArgs, out_dir: &Path, jobs: Option<usize>) -> Result<ExitCode> {
    let mut cfg = config::load(args.config.as_deref(), &args.overrides)?.experiment;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    cfg.validate()?;
    let with_source = cfg.generators.contains(&GeneratorKind::Pretrain);
    let data = load_prepared(&cache_dir(&args.data_dir), cfg.dataset, with_source)?;
    log::info!(
        "{}: {} rows, {} features; {} N values x {} reps",
        cfg.dataset.name(),
        data.pool.n_samples(),
        data.pool.dim(),
        cfg.n_grid().len(),
        cfg.repetitions
    );
    let audit = AuditLog::new();
    let output = run_suite(&cfg, &data, Execution::from_jobs(jobs), Some(&audit))?;
    let audit_report = audit.check(&output.results);
    for v in &audit_report.violations {
        log::error!("audit: {v}");
    }
    let manifest = report::write_suite(out_dir, &cfg, &output, Some(audit_report.clone()))?;
    print!("{}", report::summary(&output.aggregate));
    println!(
        "wrote {} files to {}",
        manifest.files.len(),
        out_dir.display()
    );
    if !output.errors.is_empty() || !audit_report.is_clean() {
        eprintln!(
            "{} cell errors, {} audit violations (see {})",
            output.errors.len(),
            audit_report.violations.len(),
            out_dir.join(report::ERRORS_CSV).display()
        );
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn report_cmd(out_dir: &Path) -> Result<ExitCode> {
    let missing: Vec<&str> = [AGGREGATE_JSON, MANIFEST_JSON]
        .into_iter()
        .filter(|f| !out_dir.join(f).is_file())
        .collect();
    if !missing.is_empty() {
        bail!(
            "{} is missing {}; run `mothnet run --out-dir {}` first",
            out_dir.display(),
            missing.join(" and "),
            out_dir.display()
        );
    }
    let agg = report::read_aggregate(out_dir).context("reading aggregate")?;
    let manifest = report::read_manifest(out_dir).context("reading manifest")?;
    print!("{}", report::summary(&agg));
    let files = report::write_tables(out_dir, &agg)?;
    println!(
        "{} result cells, {} cell errors; re-emitted {} tables",
        agg.len(),
        manifest.errors.len(),
        files.len()
    );
    Ok(if manifest.errors.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn selftest_cmd() -> ExitCode {
    let checks = selftest::run_all();
    for c in &checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    if checks.iter().all(|c| c.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Warn,
        (false, 0) => log::LevelFilter::Info,
        (false, 1) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();
    let outcome = match &cli.command {
        Command::Prep {
            config,
            out_dir,
            omniglot_dir,
        } => prep(config, out_dir.clone(), omniglot_dir.clone()),
        Command::Run {
            config,
            out_dir,
            jobs,
        } => run(config, out_dir, *jobs),
        Command::Report { out_dir } => report_cmd(out_dir),
        Command::Selftest => Ok(selftest_cmd()),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(2)
    })
}
