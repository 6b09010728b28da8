use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::validate_training_set;
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmOptions {
    /// Hinge-loss weight; the L2 penalty is `λ = 1 / (C · n)`.
    pub c: f64,
    pub epochs: usize,
}

impl Default for SvmOptions {
    fn default() -> Self {
        Self {
            c: 1.0,
            epochs: 600,
        }
    }
}

/// One-vs-rest linear SVM, L2-regularised hinge loss.
///
/// Each binary problem minimises `λ/2 ‖w‖² + mean_i max(0, 1 − y_i w·x_i)`
/// (bias folded in as a constant feature) by full-batch sub-gradient steps
/// with the schedule `η_t = 1 / (λ t)`, projected onto `‖w‖ ≤ 1/√λ`. The
/// returned weights average the iterates of the second half of the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    /// `n_classes × (d + 1)`, last column is the bias.
    weights: Array2<f64>,
}

fn train_binary(x: &Array2<f64>, y: &Array1<f64>, lambda: f64, epochs: usize) -> Array1<f64> {
    let (n, d) = x.dim();
    let mut w = Array1::<f64>::zeros(d);
    let mut avg = Array1::<f64>::zeros(d);
    let mut averaged = 0usize;
    let radius = 1.0 / lambda.sqrt();
    let burn_in = epochs / 2;
    for t in 1..=epochs {
        let margins = x.dot(&w) * y;
        let mut grad = &w * lambda;
        let violators: Vec<usize> = (0..n).filter(|&i| margins[i] < 1.0).collect();
        if !violators.is_empty() {
            let mut push = Array1::<f64>::zeros(d);
            for &i in &violators {
                push.scaled_add(y[i], &x.row(i));
            }
            grad.scaled_add(-1.0 / n as f64, &push);
        }
        let eta = 1.0 / (lambda * t as f64);
        w.scaled_add(-eta, &grad);
        let norm = w.dot(&w).sqrt();
        if norm > radius {
            w *= radius / norm;
        }
        if t > burn_in {
            avg += &w;
            averaged += 1;
        }
    }
    avg / averaged.max(1) as f64
}

impl LinearSvm {
    pub fn fit(train: &LabeledDataset, options: &SvmOptions) -> Result<Self> {
        let n_classes = validate_training_set(train)?;
        if options.c.is_nan() || options.c <= 0.0 || options.epochs == 0 {
            return Err(Error::Config("svm needs c > 0 and epochs >= 1".into()));
        }
        let n = train.n_samples();
        let lambda = 1.0 / (options.c * n as f64);
        let ones = Array2::<f64>::ones((n, 1));
        let x = ndarray::concatenate(Axis(1), &[train.features().view(), ones.view()])
            .map_err(|e| Error::Input(e.to_string()))?;
        let mut weights = Array2::<f64>::zeros((n_classes, x.ncols()));
        for c in 0..n_classes {
            let y: Array1<f64> = train
                .labels()
                .iter()
                .map(|&l| if l == c { 1.0 } else { -1.0 })
                .collect();
            weights
                .row_mut(c)
                .assign(&train_binary(&x, &y, lambda, options.epochs));
        }
        Ok(Self { weights })
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols() - 1
    }

    pub fn margins(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        self.weights
            .outer_iter()
            .map(|w| w.iter().take(d).zip(x).map(|(a, b)| a * b).sum::<f64>() + w[d])
            .collect()
    }

    /// Largest margin, ties to the lowest class id.
    pub fn predict(&self, x: &[f64]) -> usize {
        let m = self.margins(x);
        let mut best = 0;
        for (c, &v) in m.iter().enumerate() {
            if v > m[best] {
                best = c;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn separable() -> LabeledDataset {
        LabeledDataset::new(
            array![[0.0, 0.0], [0.2, 0.1], [1.0, 1.0], [0.9, 1.2]],
            vec![0, 0, 1, 1],
        )
        .unwrap()
    }

    #[test]
    fn separates_two_points_per_class() {
        let data = separable();
        let svm = LinearSvm::fit(&data, &SvmOptions::default()).unwrap();
        for i in 0..4 {
            assert_eq!(svm.predict(&data.row(i).to_vec()), data.labels()[i]);
        }
        assert_eq!(svm.predict(&[-3.0, -3.0]), 0);
        assert_eq!(svm.predict(&[4.0, 4.0]), 1);
    }

    #[test]
    fn row_order_does_not_change_predictions() {
        let data = separable();
        let a = LinearSvm::fit(&data, &SvmOptions::default()).unwrap();
        let b = LinearSvm::fit(&data.select_rows(&[3, 1, 0, 2]), &SvmOptions::default()).unwrap();
        for q in [[0.1, 0.3], [0.7, 0.4], [0.5, 0.6], [2.0, -1.0]] {
            assert_eq!(a.predict(&q), b.predict(&q));
        }
    }

    #[test]
    fn bad_options() {
        assert!(LinearSvm::fit(&separable(), &SvmOptions { c: 0.0, epochs: 10 }).is_err());
    }
}
