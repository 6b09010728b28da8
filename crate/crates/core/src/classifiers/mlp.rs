//! One-hidden-layer perceptron: tanh hidden units, softmax output,
//! mean cross-entropy plus an L2 penalty on the weight matrices.
//!
//! Training is full-batch gradient descent with an adaptive step: a step
//! that lowers the loss is accepted and the rate grows by 5%, a step that
//! raises it is rejected and the rate halves. Accepted losses therefore
//! never increase.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::validate_training_set;
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpOptions {
    /// `None` means one hidden unit per input feature.
    pub hidden_units: Option<usize>,
    /// Cap on loss evaluations (accepted or rejected steps).
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2_penalty: f64,
    /// Stop once an accepted step improves the loss by less than this.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for MlpOptions {
    fn default() -> Self {
        Self {
            hidden_units: None,
            epochs: 300,
            learning_rate: 0.5,
            l2_penalty: 1e-4,
            tolerance: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// Parameter-shaped gradient of the training loss.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

fn one_hot(labels: &[usize], n_classes: usize) -> Array2<f64> {
    let mut y = Array2::zeros((labels.len(), n_classes));
    for (i, &l) in labels.iter().enumerate() {
        y[[i, l]] = 1.0;
    }
    y
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.outer_iter_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn init(n_inputs: usize, n_hidden: usize, n_outputs: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut glorot = |rows: usize, cols: usize| {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-limit..limit))
        };
        let w1 = glorot(n_hidden, n_inputs);
        let w2 = glorot(n_outputs, n_hidden);
        Self {
            w1,
            b1: Array1::zeros(n_hidden),
            w2,
            b2: Array1::zeros(n_outputs),
        }
    }

    pub fn dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn n_hidden(&self) -> usize {
        self.w1.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.w2.nrows()
    }

    fn hidden(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut h = x.dot(&self.w1.t()) + &self.b1;
        h.mapv_inplace(f64::tanh);
        h
    }

    /// Softmax outputs, one row per sample.
    pub fn probabilities(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut z = self.hidden(x).dot(&self.w2.t()) + &self.b2;
        softmax_rows(&mut z);
        z
    }

    pub fn predict_batch(&self, x: &Array2<f64>) -> Vec<usize> {
        self.probabilities(x)
            .outer_iter()
            .map(|p| {
                let mut best = 0;
                for (c, &v) in p.iter().enumerate() {
                    if v > p[best] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let row = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("row shape");
        self.predict_batch(&row)[0]
    }

    fn penalty(&self, l2: f64) -> f64 {
        0.5 * l2
            * (self.w1.iter().map(|v| v * v).sum::<f64>()
                + self.w2.iter().map(|v| v * v).sum::<f64>())
    }

    pub fn loss(&self, x: &Array2<f64>, y: &Array2<f64>, l2: f64) -> f64 {
        let p = self.probabilities(x);
        let n = x.nrows() as f64;
        let ce: f64 = p
            .iter()
            .zip(y.iter())
            .filter(|(_, t)| **t > 0.0)
            .map(|(p, t)| -t * p.max(1e-300).ln())
            .sum();
        ce / n + self.penalty(l2)
    }

    /// Loss and its analytic gradient by back-propagation.
    pub fn loss_and_gradient(&self, x: &Array2<f64>, y: &Array2<f64>, l2: f64) -> (f64, Gradient) {
        let n = x.nrows() as f64;
        let h = self.hidden(x);
        let mut p = h.dot(&self.w2.t()) + &self.b2;
        softmax_rows(&mut p);
        let ce: f64 = p
            .iter()
            .zip(y.iter())
            .filter(|(_, t)| **t > 0.0)
            .map(|(p, t)| -t * p.max(1e-300).ln())
            .sum();
        let loss = ce / n + self.penalty(l2);

        let dz2 = (&p - y) / n;
        let w2 = dz2.t().dot(&h) + &self.w2 * l2;
        let b2 = dz2.sum_axis(Axis(0));
        let mut dz1 = dz2.dot(&self.w2);
        dz1.zip_mut_with(&h, |d, &hv| *d *= 1.0 - hv * hv);
        let w1 = dz1.t().dot(x) + &self.w1 * l2;
        let b1 = dz1.sum_axis(Axis(0));
        (loss, Gradient { w1, b1, w2, b2 })
    }

    fn stepped(&self, g: &Gradient, lr: f64) -> Self {
        let mut out = self.clone();
        out.w1.scaled_add(-lr, &g.w1);
        out.b1.scaled_add(-lr, &g.b1);
        out.w2.scaled_add(-lr, &g.w2);
        out.b2.scaled_add(-lr, &g.b2);
        out
    }

    pub fn fit(train: &LabeledDataset, options: &MlpOptions) -> Result<Self> {
        Ok(Self::fit_with_history(train, options)?.0)
    }

    /// Fits from a fresh initialisation; also returns the accepted-loss trace.
    pub fn fit_with_history(
        train: &LabeledDataset,
        options: &MlpOptions,
    ) -> Result<(Self, Vec<f64>)> {
        let n_classes = validate_training_set(train)?;
        let hidden = options.hidden_units.unwrap_or(train.dim());
        if hidden == 0 {
            return Err(Error::Config("mlp needs at least one hidden unit".into()));
        }
        let init = Self::init(train.dim(), hidden, n_classes, options.seed);
        init.continue_training(train, options)
    }

    /// Further training starting from `self` (used for pre-training).
    pub fn continue_training(
        &self,
        train: &LabeledDataset,
        options: &MlpOptions,
    ) -> Result<(Self, Vec<f64>)> {
        let n_classes = validate_training_set(train)?;
        if train.dim() != self.dim() {
            return Err(Error::Input(format!(
                "training set has {} features, network has {} inputs",
                train.dim(),
                self.dim()
            )));
        }
        if n_classes > self.n_classes() {
            return Err(Error::Input(format!(
                "training labels need {n_classes} outputs, network has {}",
                self.n_classes()
            )));
        }
        let x = train.features();
        let y = one_hot(train.labels(), self.n_classes());
        let l2 = options.l2_penalty;
        let mut model = self.clone();
        if options.epochs == 0 {
            return Ok((model, Vec::new()));
        }
        let (mut loss, mut grad) = model.loss_and_gradient(x, &y, l2);
        let mut history = vec![loss];
        let mut lr = options.learning_rate;
        for _ in 0..options.epochs {
            let candidate = model.stepped(&grad, lr);
            let (cand_loss, cand_grad) = candidate.loss_and_gradient(x, &y, l2);
            if cand_loss <= loss {
                let improvement = loss - cand_loss;
                model = candidate;
                loss = cand_loss;
                grad = cand_grad;
                history.push(loss);
                lr *= 1.05;
                if improvement < options.tolerance {
                    break;
                }
            } else {
                lr *= 0.5;
                if lr < 1e-12 {
                    break;
                }
            }
        }
        Ok((model, history))
    }
}
