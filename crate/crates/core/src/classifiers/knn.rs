use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::validate_training_set;
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnOptions {
    pub k: usize,
}

impl Default for KnnOptions {
    fn default() -> Self {
        Self { k: 1 }
    }
}

/// Euclidean k-nearest-neighbour vote. Equidistant neighbours are taken in
/// training-row order; vote ties go to the lowest class id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    k: usize,
    n_classes: usize,
    points: Array2<f64>,
    labels: Vec<usize>,
}

impl Knn {
    pub fn fit(train: &LabeledDataset, options: &KnnOptions) -> Result<Self> {
        let n_classes = validate_training_set(train)?;
        if options.k == 0 {
            return Err(Error::Config("knn k must be at least 1".into()));
        }
        Ok(Self {
            k: options.k.min(train.n_samples()),
            n_classes,
            points: train.features().clone(),
            labels: train.labels().to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Indices of the `k` nearest training rows, nearest first.
    pub fn neighbours(&self, x: &[f64]) -> Vec<usize> {
        let mut dist: Vec<(f64, usize)> = self
            .points
            .outer_iter()
            .enumerate()
            .map(|(i, p)| (p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        let by_distance =
            |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, by_distance);
            dist.truncate(self.k);
        }
        dist.sort_by(by_distance);
        dist.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let mut votes = vec![0usize; self.n_classes];
        for i in self.neighbours(x) {
            votes[self.labels[i]] += 1;
        }
        let mut best = 0;
        for (c, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = c;
            }
        }
        best
    }
}
