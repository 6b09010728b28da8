use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

/// Relative singular-value cut-off below which a direction counts as empty.
const RANK_TOL: f64 = 1e-10;

/// An affine map `x ↦ W (x − mean)`; rows of `W` beyond `n_active` are zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub mean: Vec<f64>,
    /// `n_components × d`, row-major.
    pub weights: Vec<Vec<f64>>,
    pub n_active: usize,
}

impl Projection {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let centred: Vec<f64> = x.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        self.weights
            .iter()
            .map(|w| w.iter().zip(&centred).map(|(a, b)| a * b).sum())
            .collect()
    }
}

pub(crate) fn column_means(train: &LabeledDataset) -> Vec<f64> {
    let n = train.n_samples() as f64;
    (0..train.dim())
        .map(|j| train.features().column(j).sum() / n)
        .collect()
}

pub(crate) fn centred_matrix(train: &LabeledDataset, mean: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(train.n_samples(), train.dim(), |i, j| {
        train.features()[[i, j]] - mean[j]
    })
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
pub(crate) fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Top `k` principal axes of `train`. Missing directions (rank below `k`)
/// come back as zero rows, with `n_active` counting the real ones.
pub fn fit_pca(train: &LabeledDataset, k: usize) -> Result<Projection> {
    if train.n_samples() < 2 {
        return Err(Error::Input("pca needs at least two samples".into()));
    }
    train.check_finite()?;
    let d = train.dim();
    let mean = column_means(train);
    let svd = centred_matrix(train, &mean).svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Degenerate("svd did not return right singular vectors".into()))?;
    let sigma = svd.singular_values;
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));
    let top = order.first().map_or(0.0, |&i| sigma[i]);

    let mut weights = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        if top == 0.0 || sigma[i] <= RANK_TOL * top {
            break;
        }
        let mut row: Vec<f64> = v_t.row(i).iter().copied().collect();
        fix_sign(&mut row);
        weights.push(row);
    }
    let n_active = weights.len();
    if n_active < k {
        log::warn!("pca: only {n_active} of {k} directions carry variance; padding with zeros");
    }
    weights.resize(k, vec![0.0; d]);
    Ok(Projection {
        mean,
        weights,
        n_active,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use ndarray::Array2;
    use rand::Rng;

    fn random(n: usize, d: usize, seed: u64) -> LabeledDataset {
        let mut rng = rng_from_seed(seed);
        let f = Array2::from_shape_simple_fn((n, d), || rng.random_range(-1.0..1.0));
        LabeledDataset::new(f, vec![0; n]).unwrap()
    }

    #[test]
    fn rank_one_data_has_one_active_direction() {
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![i as f64, 2.0 * i as f64, -(i as f64)])
            .collect();
        let ds = LabeledDataset::from_rows(&rows, vec![0; 12]).unwrap();
        let p = fit_pca(&ds, 10).unwrap();
        assert_eq!(p.n_active, 1);
        assert_eq!(p.n_components(), 10);
        for r in &rows {
            let z = p.apply(r);
            assert!(z[1..].iter().all(|v| v.abs() < 1e-10));
        }
    }

    #[test]
    fn mean_maps_to_zero() {
        let ds = random(15, 5, 3);
        let p = fit_pca(&ds, 10).unwrap();
        assert!(p.apply(&p.mean).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn full_rank_reconstruction() {
        let ds = random(20, 6, 4);
        let p = fit_pca(&ds, 6).unwrap();
        for i in 0..20 {
            let x = ds.row(i).to_vec();
            let z = p.apply(&x);
            for (j, xj) in x.iter().enumerate() {
                let back: f64 = p.mean[j] + (0..6).map(|c| z[c] * p.weights[c][j]).sum::<f64>();
                assert!((back - xj).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn projected_variance_is_non_increasing() {
        let ds = random(40, 12, 5);
        let p = fit_pca(&ds, 10).unwrap();
        let var: Vec<f64> = (0..10)
            .map(|c| {
                (0..40)
                    .map(|i| p.apply(&ds.row(i).to_vec())[c].powi(2))
                    .sum::<f64>()
            })
            .collect();
        assert!(var.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }

    #[test]
    fn components_are_sign_fixed() {
        let p = fit_pca(&random(30, 8, 6), 8).unwrap();
        for w in &p.weights {
            let big = w
                .iter()
                .copied()
                .fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn single_sample_is_rejected() {
        assert!(fit_pca(&random(1, 3, 0), 2).is_err());
    }
}
