//! Synthetic-fixture checks with independent oracles, shared by the CLI's
//! `selftest` command and the acceptance suite.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classifiers::{Knn, KnnOptions, Mlp};
use crate::dataset::LabeledDataset;
use crate::error::Result;
use crate::experiments::fd_to_pvalue;
use crate::featuregen::fit_mothnet;
use crate::featuregen::fit_pca;
use crate::mothnet::Template;
use crate::rng::rng_from_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues in descending order with unit eigenvectors as rows.
#[allow(clippy::needless_range_loop)] // rotations index rows and columns symmetrically
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j][j].total_cmp(&m[i][i]));
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&i| v.iter().map(|row| row[i]).collect())
        .collect();
    (values, vectors)
}

fn random_matrix(rows: usize, cols: usize, seed: u64) -> LabeledDataset {
    let mut rng = rng_from_seed(seed);
    // column scales spread the spectrum so eigenvalue gaps are not tiny
    let features = Array2::from_shape_fn((rows, cols), |(_, j)| {
        rng.random_range(-1.0..1.0) * (1.0 + j as f64)
    });
    LabeledDataset::new(features, vec![0; rows]).expect("shape")
}

/// Largest sine of the angle between a PCA component and the matching
/// covariance eigenvector.
pub fn pca_oracle_error(data: &LabeledDataset, k: usize) -> Result<f64> {
    let projection = fit_pca(data, k)?;
    let (n, d) = (data.n_samples(), data.dim());
    let mean: Vec<f64> = (0..d)
        .map(|j| data.features().column(j).sum() / n as f64)
        .collect();
    let cov: Vec<Vec<f64>> = (0..d)
        .map(|a| {
            (0..d)
                .map(|b| {
                    (0..n)
                        .map(|i| {
                            (data.features()[[i, a]] - mean[a])
                                * (data.features()[[i, b]] - mean[b])
                        })
                        .sum::<f64>()
                        / (n - 1) as f64
                })
                .collect()
        })
        .collect();
    let (_, vectors) = jacobi_eigen(&cov);
    let mut worst: f64 = 0.0;
    for (w, e) in projection
        .weights
        .iter()
        .zip(&vectors)
        .take(projection.n_active)
    {
        let dot: f64 = w.iter().zip(e).map(|(a, b)| a * b).sum();
        let residual: f64 = w
            .iter()
            .zip(e)
            .map(|(a, b)| (a - dot * b).powi(2))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(residual);
    }
    Ok(worst)
}

/// Exhaustive-scan k-NN: sort every training row by (distance, index) and
/// vote, ties to the lowest class.
pub fn knn_oracle(train: &LabeledDataset, k: usize, x: &[f64]) -> usize {
    let mut d: Vec<(f64, usize)> = (0..train.n_samples())
        .map(|i| {
            (
                train
                    .row(i)
                    .iter()
                    .zip(x)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum(),
                i,
            )
        })
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut votes = vec![0usize; train.n_classes()];
    for &(_, i) in d.iter().take(k) {
        votes[train.labels()[i]] += 1;
    }
    let best = votes.iter().copied().max().unwrap_or(0);
    votes.iter().position(|&v| v == best).unwrap_or(0)
}

/// Queries where [`Knn`] disagrees with [`knn_oracle`].
pub fn knn_oracle_mismatches(n_queries: usize, k: usize, seed: u64) -> Result<usize> {
    let mut rng = rng_from_seed(seed);
    let rows: Vec<Vec<f64>> = (0..60)
        .map(|_| {
            (0..5)
                .map(|_| f64::from(rng.random_range(0..4u8)))
                .collect()
        })
        .collect();
    let labels = (0..60).map(|_| rng.random_range(0..4)).collect();
    let train = LabeledDataset::from_rows(&rows, labels)?;
    let knn = Knn::fit(&train, &KnnOptions { k })?;
    let mut mismatches = 0;
    for _ in 0..n_queries {
        let q: Vec<f64> = (0..5)
            .map(|_| f64::from(rng.random_range(0..4u8)) + rng.random_range(-0.5..0.5))
            .collect();
        if knn.predict(&q) != knn_oracle(&train, k, &q) {
            mismatches += 1;
        }
    }
    Ok(mismatches)
}

/// Max relative error between the analytic MLP gradient and central
/// differences on a `d × h × c` net.
pub fn mlp_gradient_error(d: usize, h: usize, c: usize, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let mut net = Mlp::init(d, h, c, seed);
    net.b1.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    net.b2.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    let n = 7;
    let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
    let y = Array2::from_shape_fn((n, c), |(i, j)| f64::from(u8::from(j == i % c)));
    let l2 = 1e-2;
    let (_, g) = net.loss_and_gradient(&x, &y, l2);
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    let mut probe = |param: &dyn Fn(&mut Mlp) -> &mut f64, analytic: f64| {
        let mut plus = net.clone();
        *param(&mut plus) += eps;
        let mut minus = net.clone();
        *param(&mut minus) -= eps;
        let numeric = (plus.loss(&x, &y, l2) - minus.loss(&x, &y, l2)) / (2.0 * eps);
        let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-8);
        worst = worst.max(rel);
    };
    for i in 0..h {
        for j in 0..d {
            probe(&|m: &mut Mlp| &mut m.w1[[i, j]], g.w1[[i, j]]);
        }
        probe(&|m: &mut Mlp| &mut m.b1[i], g.b1[i]);
    }
    for i in 0..c {
        for j in 0..h {
            probe(&|m: &mut Mlp| &mut m.w2[[i, j]], g.w2[[i, j]]);
        }
        probe(&|m: &mut Mlp| &mut m.b2[i], g.b2[i]);
    }
    worst
}

/// Test accuracy of a small MothNet on two disjoint-support classes.
pub fn two_class_mothnet_accuracy(seed: u64) -> Result<f64> {
    let mut rng = rng_from_seed(seed);
    let d = 20;
    let sample = |rng: &mut crate::rng::SimRng, class: usize| -> Vec<f64> {
        (0..d)
            .map(|j| {
                if (j < d / 2) == (class == 0) {
                    rng.random_range(0.6..1.0)
                } else {
                    rng.random_range(0.0..0.1)
                }
            })
            .collect()
    };
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..60 {
        rows.push(sample(&mut rng, i % 2));
        labels.push(i % 2);
    }
    let data = LabeledDataset::from_rows(&rows, labels)?;
    let train = data.select_rows(&(0..20).collect::<Vec<_>>());
    let test = data.select_rows(&(20..60).collect::<Vec<_>>());
    let template = Template {
        n_mb: 400,
        n_readouts: 2,
        ..Template::for_features(d)
    };
    let (net, stats) = fit_mothnet(&template, &train, seed)?;
    net.accuracy(&stats, &test)
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        passed,
        detail,
    }
}

/// Runs every synthetic check. Never panics; failures are reported.
pub fn run_all() -> Vec<Check> {
    let mut out = Vec::new();
    match two_class_mothnet_accuracy(3) {
        Ok(acc) => out.push(check(
            "mothnet two-class separable",
            acc >= 0.95,
            format!("accuracy {acc:.3} (need >= 0.95)"),
        )),
        Err(e) => out.push(check("mothnet two-class separable", false, e.to_string())),
    }
    let pca: Result<f64> = (0..5)
        .map(|s| pca_oracle_error(&random_matrix(30, 8, s), 8))
        .try_fold(0.0, |a, e| Ok(f64::max(a, e?)));
    match pca {
        Ok(err) => out.push(check(
            "pca vs jacobi oracle",
            err < 1e-6,
            format!("max sin(angle) {err:.2e} (need < 1e-6)"),
        )),
        Err(e) => out.push(check("pca vs jacobi oracle", false, e.to_string())),
    }
    match knn_oracle_mismatches(200, 3, 1) {
        Ok(m) => out.push(check(
            "knn vs exhaustive oracle",
            m == 0,
            format!("{m} of 200 queries differ"),
        )),
        Err(e) => out.push(check("knn vs exhaustive oracle", false, e.to_string())),
    }
    let g = mlp_gradient_error(10, 8, 5, 4);
    out.push(check(
        "mlp gradient vs finite differences",
        g <= 1e-4,
        format!("max relative error {g:.2e}"),
    ));
    let p = [fd_to_pvalue(1.0), fd_to_pvalue(2.0), fd_to_pvalue(3.0)];
    let ok = (p[0] - 0.32).abs() <= 0.005 && (p[1] - 0.05).abs() <= 0.005 && p[2] <= 0.005;
    out.push(check(
        "fd to p calibration",
        ok,
        format!("p(1)={:.4} p(2)={:.4} p(3)={:.4}", p[0], p[1], p[2]),
    ));
    out
}
