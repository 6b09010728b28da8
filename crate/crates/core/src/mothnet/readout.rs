use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{MothNet, Supervision};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

/// Relative variance floor: `σ² ≥ VARIANCE_FLOOR · (mean readout)²`.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Per-class Gaussian summary of readout responses on the training set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutStats {
    /// `mean[c][k]`: mean of readout `k` over training samples of class `c`.
    pub mean: Vec<Vec<f64>>,
    pub var: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
    pub variance_floor: f64,
}

impl ReadoutStats {
    /// Population moments per class over `responses`, with the variance floor applied.
    pub fn from_responses(
        responses: &[Vec<f64>],
        labels: &[usize],
        n_classes: usize,
    ) -> Result<Self> {
        let n_readouts = responses.first().map_or(0, Vec::len);
        let mut mean = vec![vec![0.0; n_readouts]; n_classes];
        let mut var = vec![vec![0.0; n_readouts]; n_classes];
        let mut counts = vec![0usize; n_classes];
        for (r, &c) in responses.iter().zip(labels) {
            if c >= n_classes {
                return Err(Error::Input(format!(
                    "label {c} has no readout (n_readouts = {n_classes})"
                )));
            }
            counts[c] += 1;
            mean[c].iter_mut().zip(r).for_each(|(m, v)| *m += v);
        }
        for (m, &n) in mean.iter_mut().zip(&counts) {
            if n > 0 {
                m.iter_mut().for_each(|v| *v /= n as f64);
            }
        }
        for (r, &c) in responses.iter().zip(labels) {
            var[c]
                .iter_mut()
                .zip(r)
                .zip(&mean[c])
                .for_each(|((s, v), m)| *s += (v - m).powi(2));
        }
        for (s, &n) in var.iter_mut().zip(&counts) {
            if n > 0 {
                s.iter_mut().for_each(|v| *v /= n as f64);
            }
        }
        let total: f64 = responses.iter().flatten().sum();
        let scale = total / (responses.len() * n_readouts).max(1) as f64;
        let variance_floor = (VARIANCE_FLOOR * scale * scale).max(f64::MIN_POSITIVE);
        var.iter_mut()
            .flatten()
            .for_each(|v| *v = v.max(variance_floor));
        Ok(Self {
            mean,
            var,
            counts,
            variance_floor,
        })
    }

    /// Sum over readouts of the Gaussian log-density under each class.
    /// Classes without training samples score `-inf`.
    pub fn log_likelihoods(&self, readout: &[f64]) -> Vec<f64> {
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        (0..self.counts.len())
            .map(|c| {
                if self.counts[c] == 0 {
                    return f64::NEG_INFINITY;
                }
                readout
                    .iter()
                    .zip(&self.mean[c])
                    .zip(&self.var[c])
                    .map(|((r, m), v)| -0.5 * (ln_2pi + v.ln() + (r - m).powi(2) / v))
                    .sum()
            })
            .collect()
    }

    /// Highest-scoring class, ties to the lowest id.
    pub fn classify(&self, readout: &[f64]) -> (usize, Vec<f64>) {
        let scores = self.log_likelihoods(readout);
        let best = argmax_lowest(&scores);
        (best, scores)
    }
}

pub(crate) fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

impl MothNet {
    /// Hebbian training on `train` (readout `k` ↔ class `k`), followed by a
    /// frozen-weight pass that collects [`ReadoutStats`].
    ///
    /// Samples are shuffled once from `seed`; every pass reuses that order.
    /// For each presentation the home readout is clamped to
    /// `max(readout rates) + 1` before the weight update, and under
    /// [`Supervision::ClampHomeSilenceOthers`] the other readouts are zeroed.
    pub fn train(&mut self, train: &LabeledDataset, seed: u64) -> Result<ReadoutStats> {
        if train.is_empty() {
            return Err(Error::Input("cannot train on an empty set".into()));
        }
        if train.dim() != self.n_features() {
            return Err(Error::Input(format!(
                "training set has {} features, network expects {}",
                train.dim(),
                self.n_features()
            )));
        }
        if let Some(&bad) = train.labels().iter().find(|&&c| c >= self.n_readouts()) {
            return Err(Error::Input(format!(
                "label {bad} has no readout (n_readouts = {})",
                self.n_readouts()
            )));
        }
        let mut order: Vec<usize> = (0..train.n_samples()).collect();
        order.shuffle(&mut rng_from_seed(seed));
        let mut noise = rng_from_seed(derive_seed(&[seed, 1]));
        let mode = self.template.al_mode;

        for _ in 0..self.template.training_passes {
            for &i in &order {
                let x = train.row(i).to_vec();
                let mut resp = self.evolve(&x, mode, Some(&mut noise))?;
                let top = resp.readout_rates.iter().copied().fold(0.0, f64::max);
                if self.template.supervision == Supervision::ClampHomeSilenceOthers {
                    resp.readout_rates.iter_mut().for_each(|v| *v = 0.0);
                }
                resp.readout_rates[train.labels()[i]] = top + 1.0;
                self.hebbian_update(&resp);
            }
        }
        self.readout_stats(train)
    }

    /// Noise-free readout statistics of `data` under the current weights.
    pub fn readout_stats(&self, data: &LabeledDataset) -> Result<ReadoutStats> {
        let responses = (0..data.n_samples())
            .map(|i| self.extract_features(&data.row(i).to_vec()))
            .collect::<Result<Vec<_>>>()?;
        ReadoutStats::from_responses(&responses, data.labels(), self.n_readouts())
    }

    /// Log-likelihood classification of `x`; returns the class and all scores.
    pub fn predict(&self, stats: &ReadoutStats, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        Ok(stats.classify(&self.extract_features(x)?))
    }

    pub fn accuracy(&self, stats: &ReadoutStats, data: &LabeledDataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::Input("empty evaluation set".into()));
        }
        let mut correct = 0;
        for i in 0..data.n_samples() {
            if self.predict(stats, &data.row(i).to_vec())?.0 == data.labels()[i] {
                correct += 1;
            }
        }
        Ok(correct as f64 / data.n_samples() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mothnet::Template;
    use ndarray::Array2;

    /// Two classes lighting up disjoint halves of 20 features, with jitter.
    pub(crate) fn two_class_fixture(per_class: usize) -> LabeledDataset {
        let n = 2 * per_class;
        let features = Array2::from_shape_fn((n, 20), |(i, j)| {
            let class = i % 2;
            let on = (j < 10) == (class == 0);
            let jitter = ((i * 31 + j * 17) % 11) as f64 / 50.0;
            if on {
                0.7 + jitter
            } else {
                jitter / 4.0
            }
        });
        let labels = (0..n).map(|i| i % 2).collect();
        LabeledDataset::new(features, labels).unwrap()
    }

    fn fixture_template() -> Template {
        Template {
            n_mb: 400,
            n_readouts: 2,
            ..Template::for_features(20)
        }
    }

    #[test]
    fn single_sample_grows_home_readout() {
        let data = two_class_fixture(1).select_rows(&[0]);
        let mut net = MothNet::generate(&fixture_template(), 1).unwrap();
        let before = net.mb_to_readout.clone();
        net.train(&data, 0).unwrap();
        let home = data.labels()[0];
        assert!((0..400).any(|j| net.mb_to_readout[[home, j]] > before[[home, j]]));
    }

    #[test]
    fn silenced_off_class_readouts_decay_where_the_literal_clamp_grows() {
        let data = two_class_fixture(1).select_rows(&[0]);
        let off = 1 - data.labels()[0];
        for (mode, grows) in [
            (Supervision::ClampHome, true),
            (Supervision::ClampHomeSilenceOthers, false),
        ] {
            let t = Template {
                supervision: mode,
                noise_std: 0.0,
                ..fixture_template()
            };
            let mut net = MothNet::generate(&t, 1).unwrap();
            let active = net
                .evolve(&data.row(0).to_vec(), t.al_mode, None)
                .unwrap()
                .mb_rates;
            let before = net.mb_to_readout.clone();
            net.train(&data, 0).unwrap();
            let j = active.iter().position(|&f| f > 0.0).unwrap();
            assert_eq!(
                net.mb_to_readout[[off, j]] > before[[off, j]],
                grows,
                "{mode:?}"
            );
        }
    }

    #[test]
    fn inert_rates_leave_weights_alone() {
        let t = Template {
            hebbian_growth_rate: 0.0,
            hebbian_decay_rate: 0.0,
            ..fixture_template()
        };
        let mut net = MothNet::generate(&t, 2).unwrap();
        let before = net.clone();
        net.train(&two_class_fixture(5), 3).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn home_readouts_dominate_after_training() {
        let data = two_class_fixture(5);
        let mut net = MothNet::generate(&fixture_template(), 3).unwrap();
        let stats = net.train(&data, 4).unwrap();
        // mean of readout k on class c
        assert!(stats.mean[0][0] > stats.mean[1][0]);
        assert!(stats.mean[1][1] > stats.mean[0][1]);
        assert!(net.accuracy(&stats, &data).unwrap() >= 0.9);
        for i in 0..data.n_samples() {
            let f = net.extract_features(&data.row(i).to_vec()).unwrap();
            assert_eq!(argmax_lowest(&f), data.labels()[i]);
        }
    }

    #[test]
    fn sole_training_sample_is_recognised() {
        let t = Template {
            n_readouts: 4,
            noise_std: 0.0,
            ..fixture_template()
        };
        let base = two_class_fixture(2);
        // class 3 only, plus class 0
        let data = base.select_rows(&[0, 1]).with_labels(vec![0, 3]).unwrap();
        let mut net = MothNet::generate(&t, 5).unwrap();
        let stats = net.train(&data, 6).unwrap();
        assert_eq!(net.predict(&stats, &data.row(1).to_vec()).unwrap().0, 3);
    }

    #[test]
    fn identical_class_statistics_tie_to_class_zero() {
        let stats = ReadoutStats {
            mean: vec![vec![1.0, 2.0]; 3],
            var: vec![vec![0.5, 0.5]; 3],
            counts: vec![4; 3],
            variance_floor: 1e-9,
        };
        assert_eq!(stats.classify(&[5.0, -1.0]).0, 0);
    }

    #[test]
    fn variance_floor_keeps_scores_finite() {
        let stats = ReadoutStats::from_responses(&[vec![2.0, 0.0]], &[0], 1).unwrap();
        assert!(stats.var[0]
            .iter()
            .all(|&v| v >= stats.variance_floor && v > 0.0));
        assert!(stats.log_likelihoods(&[2.1, 0.1])[0].is_finite());
    }

    #[test]
    fn untrained_zero_input_gives_zero_features() {
        let net = MothNet::generate(&fixture_template(), 7).unwrap();
        assert_eq!(net.extract_features(&[0.0; 20]).unwrap(), vec![0.0, 0.0]);
        let x: Vec<f64> = (0..20).map(|j| j as f64 / 20.0).collect();
        assert_eq!(
            net.extract_features(&x).unwrap(),
            net.extract_features(&x).unwrap()
        );
    }

    #[test]
    fn empty_training_set_is_rejected() {
        let mut net = MothNet::generate(&fixture_template(), 0).unwrap();
        let empty = LabeledDataset::new(Array2::zeros((0, 20)), vec![]).unwrap();
        assert!(matches!(net.train(&empty, 0), Err(Error::Input(_))));
    }
}
