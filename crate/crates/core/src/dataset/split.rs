use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub n_train_per_class: usize,
    pub n_test_per_class: usize,
    pub seed: u64,
}

/// Draws `n_train_per_class` training rows and a disjoint set of
/// `n_test_per_class` test rows from every class.
pub fn sample_split(
    ds: &LabeledDataset,
    spec: &SplitSpec,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if spec.n_train_per_class == 0 {
        return Err(Error::Input(
            "need at least one training sample per class".into(),
        ));
    }
    let needed = spec.n_train_per_class + spec.n_test_per_class;
    let mut rng = rng_from_seed(spec.seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut rows) in ds.class_index() {
        if rows.len() < needed {
            return Err(Error::InsufficientSamples {
                class,
                needed,
                available: rows.len(),
            });
        }
        rows.shuffle(&mut rng);
        train.extend_from_slice(&rows[..spec.n_train_per_class]);
        test.extend_from_slice(&rows[spec.n_train_per_class..needed]);
    }
    Ok((ds.select_rows(&train), ds.select_rows(&test)))
}

/// Order-independent fingerprint of the rows in `ds`.
pub fn split_hash(ds: &LabeledDataset) -> u64 {
    let mut ids = ds.row_ids().to_vec();
    ids.sort_unstable();
    derive_seed(&ids)
}

/// Picks `count` classes at random and relabels them `0..count` in
/// ascending order of their original ids.
pub fn select_classes(ds: &LabeledDataset, count: usize, seed: u64) -> Result<LabeledDataset> {
    let mut classes = ds.classes();
    if classes.len() < count {
        return Err(Error::InsufficientClasses {
            requested: count,
            available: classes.len(),
        });
    }
    classes.shuffle(&mut rng_from_seed(seed));
    classes.truncate(count);
    classes.sort_unstable();
    let index = ds.class_index();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (new_label, c) in classes.iter().enumerate() {
        rows.extend_from_slice(&index[c]);
        labels.extend(std::iter::repeat_n(new_label, index[c].len()));
    }
    ds.select_rows(&rows).with_labels(labels)
}
