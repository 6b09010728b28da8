//! End-to-end runs of the `mothnet` binary on a small synthetic IDX set.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mothnet_core::dataset::idx::{serialize_idx_images, serialize_idx_labels};
use mothnet_core::dataset::{RawImageSet, Source};
use mothnet_core::rng::rng_from_seed;
use rand::Rng;

const CONFIG: &str = r#"
[prep]
calibration_per_class = 10
surrogate_per_class = 5

[experiment]
n_grid = [1, 3]
repetitions = 2
classifiers = ["knn"]
generators = ["mothnet", "pca"]
n_test_per_class = 5

[experiment.mothnet]
n_mb = 200
"#;

/// 10 classes x 30 images; each class lights a different 8x8 patch over a
/// faint noisy background.
fn write_idx(dir: &Path) {
    let mut rng = rng_from_seed(5);
    let (mut images, mut labels) = (Vec::new(), Vec::new());
    for c in 0..10 {
        let (r0, c0) = (4 + 2 * (c / 5) * 4, 2 + (c % 5) * 4);
        for _ in 0..30 {
            let mut im = vec![0u8; 28 * 28];
            for r in 4..24 {
                for k in 4..24 {
                    im[r * 28 + k] = rng.random_range(0..40);
                }
            }
            for r in r0..r0 + 8 {
                for k in c0..c0 + 8 {
                    im[r * 28 + k] = rng.random_range(150..=255);
                }
            }
            images.push(im);
            labels.push(c);
        }
    }
    let set = RawImageSet::new(28, 28, images, labels, Source::Mnist).unwrap();
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(
        dir.join("train-images-idx3-ubyte"),
        serialize_idx_images(&set),
    )
    .unwrap();
    std::fs::write(
        dir.join("train-labels-idx1-ubyte"),
        serialize_idx_labels(&set),
    )
    .unwrap();
}

struct Workspace {
    _tmp: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().to_path_buf();
        write_idx(&root.join("data/mnist"));
        std::fs::write(root.join("config.toml"), CONFIG).unwrap();
        Self { _tmp: tmp, root }
    }

    fn mothnet(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_mothnet"))
            .current_dir(&self.root)
            .env_remove("MOTHNET_DATA_DIR")
            .env_remove("RUST_LOG")
            .arg("-q")
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.mothnet(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn prepped() -> Self {
        let ws = Self::new();
        ws.ok(&["prep", "--config", "config.toml"]);
        ws
    }

    fn read(&self, rel: &str) -> Vec<u8> {
        std::fs::read(self.root.join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
    }
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn prep_is_idempotent_and_writes_85_columns() {
    let ws = Workspace::prepped();
    let first = ws.read("data/cache/vmnist.csv");
    let header = String::from_utf8_lossy(&first)
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert_eq!(header.split(',').count(), 1 + 85, "{header}");
    let omniglot = ws.read("data/cache/vomniglot.csv");
    ws.ok(&["prep", "--config", "config.toml"]);
    assert_eq!(first, ws.read("data/cache/vmnist.csv"));
    assert_eq!(omniglot, ws.read("data/cache/vomniglot.csv"));
}

#[test]
fn prep_names_the_missing_labels_file() {
    let ws = Workspace::new();
    std::fs::remove_file(ws.root.join("data/mnist/train-labels-idx1-ubyte")).unwrap();
    let out = ws.mothnet(&["prep", "--config", "config.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("train-labels-idx1-ubyte"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn run_writes_artifacts_and_report_reads_them() {
    let ws = Workspace::prepped();
    let stdout = ws.ok(&["run", "--config", "config.toml", "--out-dir", "out"]);
    assert!(stdout.contains("wrote"), "{stdout}");
    for f in [
        "runs.csv",
        "errors.csv",
        "aggregate.csv",
        "aggregate.json",
        "manifest.json",
        "table_pvalues.csv",
        "table_relative_gain_pct.csv",
        "curves_accuracy.csv",
        "savings.csv",
    ] {
        assert!(ws.root.join("out").join(f).is_file(), "missing {f}");
    }
    // 2 N x 2 reps x 1 classifier x 2 generators
    let runs = String::from_utf8(ws.read("out/runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 8);
    let manifest = String::from_utf8(ws.read("out/manifest.json")).unwrap();
    assert!(manifest.contains("\"violations\": []"), "{manifest}");

    std::fs::remove_file(ws.root.join("out/table_pvalues.csv")).unwrap();
    let report = ws.ok(&["report", "--out-dir", "out"]);
    assert!(report.contains("knn"), "{report}");
    assert!(ws.root.join("out/table_pvalues.csv").is_file());
}

#[test]
fn same_seed_gives_identical_aggregate() {
    let ws = Workspace::prepped();
    ws.ok(&[
        "run",
        "--config",
        "config.toml",
        "--out-dir",
        "a",
        "--seed",
        "4",
    ]);
    ws.ok(&[
        "run",
        "--config",
        "config.toml",
        "--out-dir",
        "b",
        "--seed",
        "4",
        "--jobs",
        "1",
    ]);
    ws.ok(&[
        "run",
        "--config",
        "config.toml",
        "--out-dir",
        "c",
        "--seed",
        "5",
    ]);
    assert_eq!(ws.read("a/aggregate.csv"), ws.read("b/aggregate.csv"));
    assert_ne!(ws.read("a/aggregate.csv"), ws.read("c/aggregate.csv"));
}

#[test]
fn unknown_generator_is_a_schema_error() {
    let ws = Workspace::prepped();
    let out = ws.mothnet(&[
        "run",
        "--config",
        "config.toml",
        "--out-dir",
        "o",
        "--set",
        "generators=[\"lda\"]",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("lda"), "{}", stderr(&out));
    assert!(!ws.root.join("o/runs.csv").exists());
}

#[test]
fn run_before_prep_points_at_prep() {
    let ws = Workspace::new();
    let out = ws.mothnet(&["run", "--config", "config.toml", "--out-dir", "o"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("prep"), "{}", stderr(&out));
}

#[test]
fn cell_errors_give_a_failing_exit_code() {
    let ws = Workspace::prepped();
    // 20 pool rows per class cannot hold N = 30 plus 5 test rows
    let out = ws.mothnet(&[
        "run",
        "--config",
        "config.toml",
        "--out-dir",
        "o",
        "--set",
        "n_grid=[1, 30]",
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    let errors = String::from_utf8(ws.read("o/errors.csv")).unwrap();
    assert!(errors.lines().count() > 1, "{errors}");
    assert!(ws.root.join("o/aggregate.csv").is_file());
}

#[test]
fn report_lists_missing_artifacts() {
    let ws = Workspace::new();
    std::fs::create_dir_all(ws.root.join("empty")).unwrap();
    let out = ws.mothnet(&["report", "--out-dir", "empty"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(
        err.contains("aggregate.json") && err.contains("manifest.json"),
        "{err}"
    );
}

#[test]
fn selftest_passes() {
    let ws = Workspace::new();
    let stdout = ws.ok(&["selftest"]);
    assert!(!stdout.contains("FAIL"), "{stdout}");
    assert!(stdout.lines().count() >= 5, "{stdout}");
}
