//! Raw image ingestion, vectorising preprocessing and few-shot splits.
//!
//! MNIST arrives as IDX files ([`idx`]); Omniglot-style data arrives as a
//! directory tree of grayscale PNGs, one leaf directory per class
//! ([`images`]). Both become a [`RawImageSet`], which [`preprocess`] turns
//! into a non-spatial [`LabeledDataset`] of a fixed feature count.

mod csvio;
pub mod idx;
pub mod images;
mod preprocess;
mod split;
pub mod surrogate;

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csvio::{read_csv, write_csv};
pub use idx::{load_mnist_dir, parse_idx, parse_idx_images, parse_idx_labels};
pub use images::load_image_dir;
pub use preprocess::{
    derive_pixel_mask, pool_image, preprocess, CropBox, Normalization, PixelMask, PreprocessConfig,
};
pub use split::{sample_split, select_classes, split_hash, SplitSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Mnist,
    Omniglot,
}

/// Grayscale images sharing one `height × width` geometry, row-major `u8`.
#[derive(Clone, Debug, PartialEq)]
pub struct RawImageSet {
    pub height: usize,
    pub width: usize,
    pub images: Vec<Vec<u8>>,
    pub labels: Vec<usize>,
    pub source: Source,
    /// Directory names for image-tree sets, digit names for MNIST.
    pub class_names: Vec<String>,
}

impl RawImageSet {
    pub fn new(
        height: usize,
        width: usize,
        images: Vec<Vec<u8>>,
        labels: Vec<usize>,
        source: Source,
    ) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::Input(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(bad) = images.iter().position(|im| im.len() != height * width) {
            return Err(Error::Input(format!(
                "image {bad} has {} pixels, expected {height}x{width}",
                images[bad].len()
            )));
        }
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        let class_names = (0..n_classes).map(|c| c.to_string()).collect();
        Ok(Self {
            height,
            width,
            images,
            labels,
            source,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Keeps only the listed samples, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            height: self.height,
            width: self.width,
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            source: self.source,
            class_names: self.class_names.clone(),
        }
    }
}

/// Vectorised samples with class labels.
///
/// `row_ids` identify each row's origin in the pooled dataset; they survive
/// splitting and augmentation and are what the leakage audit checks.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    row_ids: Vec<u64>,
}

impl LabeledDataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        let row_ids = (0..labels.len() as u64).collect();
        Self::with_row_ids(features, labels, row_ids)
    }

    pub fn with_row_ids(
        features: Array2<f64>,
        labels: Vec<usize>,
        row_ids: Vec<u64>,
    ) -> Result<Self> {
        if features.nrows() != labels.len() || row_ids.len() != labels.len() {
            return Err(Error::Input(format!(
                "{} feature rows, {} labels, {} row ids",
                features.nrows(),
                labels.len(),
                row_ids.len()
            )));
        }
        Ok(Self {
            features,
            labels,
            row_ids,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Input("ragged feature rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let features = Array2::from_shape_vec((rows.len(), dim), flat)
            .map_err(|e| Error::Input(e.to_string()))?;
        Self::new(features, labels)
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row_ids(&self) -> &[u64] {
        &self.row_ids
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Distinct class ids, ascending.
    pub fn classes(&self) -> Vec<usize> {
        self.class_index().into_keys().collect()
    }

    pub fn n_classes(&self) -> usize {
        self.class_index().len()
    }

    /// Class id → row indices, each row listed exactly once.
    pub fn class_index(&self) -> BTreeMap<usize, Vec<usize>> {
        let mut index: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &c) in self.labels.iter().enumerate() {
            index.entry(c).or_default().push(i);
        }
        index
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            features: self.features.select(Axis(0), rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            row_ids: rows.iter().map(|&i| self.row_ids[i]).collect(),
        }
    }

    /// Same rows and labels with a different feature matrix.
    pub fn with_features(&self, features: Array2<f64>) -> Result<Self> {
        Self::with_row_ids(features, self.labels.clone(), self.row_ids.clone())
    }

    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Self> {
        Self::with_row_ids(self.features.clone(), labels, self.row_ids.clone())
    }

    /// Checks the emitted-feature contract: finite and non-negative.
    pub fn check_non_negative(&self) -> Result<()> {
        match self
            .features
            .iter()
            .position(|v| !v.is_finite() || *v < 0.0)
        {
            None => Ok(()),
            Some(p) => Err(Error::Input(format!(
                "feature entry {} of row {} is {}",
                p % self.dim().max(1),
                p / self.dim().max(1),
                self.features.as_slice().map_or(f64::NAN, |s| s[p])
            ))),
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.features.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Input(
                "features contain NaN or infinite values".into(),
            ))
        }
    }
}
