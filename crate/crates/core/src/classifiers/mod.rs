//! Baseline classifiers behind one fit / predict / accuracy contract.

mod knn;
pub mod mlp;
mod svm;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

pub use knn::{Knn, KnnOptions};
pub use mlp::{Mlp, MlpOptions};
pub use svm::{LinearSvm, SvmOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Knn,
    Svm,
    Mlp,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] = [
        ClassifierKind::Knn,
        ClassifierKind::Svm,
        ClassifierKind::Mlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "knn",
            ClassifierKind::Svm => "svm",
            ClassifierKind::Mlp => "mlp",
        }
    }
}

impl std::fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "knn" | "nearest_neighbors" => Ok(ClassifierKind::Knn),
            "svm" => Ok(ClassifierKind::Svm),
            "mlp" | "nn" => Ok(ClassifierKind::Mlp),
            _ => Err(Error::Config(format!(
                "unknown classifier `{s}` (expected knn, svm or mlp)"
            ))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierOptions {
    pub knn: KnnOptions,
    pub svm: SvmOptions,
    pub mlp: MlpOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classifier {
    Knn(Knn),
    Svm(LinearSvm),
    Mlp(Mlp),
}

/// Shared input checks: non-empty, finite, every class `0..=max` present.
pub(crate) fn validate_training_set(train: &LabeledDataset) -> Result<usize> {
    if train.is_empty() {
        return Err(Error::Input("empty training set".into()));
    }
    train.check_finite()?;
    let index = train.class_index();
    let n_classes = index.keys().next_back().map_or(0, |m| m + 1);
    if let Some(missing) = (0..n_classes).find(|c| !index.contains_key(c)) {
        return Err(Error::Input(format!(
            "class {missing} has no training samples"
        )));
    }
    Ok(n_classes)
}

impl Classifier {
    pub fn fit(
        kind: ClassifierKind,
        train: &LabeledDataset,
        options: &ClassifierOptions,
    ) -> Result<Self> {
        Ok(match kind {
            ClassifierKind::Knn => Classifier::Knn(Knn::fit(train, &options.knn)?),
            ClassifierKind::Svm => Classifier::Svm(LinearSvm::fit(train, &options.svm)?),
            ClassifierKind::Mlp => Classifier::Mlp(Mlp::fit(train, &options.mlp)?),
        })
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            Classifier::Knn(_) => ClassifierKind::Knn,
            Classifier::Svm(_) => ClassifierKind::Svm,
            Classifier::Mlp(_) => ClassifierKind::Mlp,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Classifier::Knn(m) => m.dim(),
            Classifier::Svm(m) => m.dim(),
            Classifier::Mlp(m) => m.dim(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim() {
            return Err(Error::Input(format!(
                "query has {} features, model was fit on {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(match self {
            Classifier::Knn(m) => m.predict(x),
            Classifier::Svm(m) => m.predict(x),
            Classifier::Mlp(m) => m.predict(x),
        })
    }

    pub fn predict_all(&self, data: &LabeledDataset) -> Result<Vec<usize>> {
        if data.dim() != self.dim() {
            return Err(Error::Input(format!(
                "data has {} features, model was fit on {}",
                data.dim(),
                self.dim()
            )));
        }
        Ok(match self {
            Classifier::Mlp(m) => m.predict_batch(data.features()),
            _ => (0..data.n_samples())
                .map(|i| self.predict(&data.row(i).to_vec()))
                .collect::<Result<_>>()?,
        })
    }

    /// Fraction of rows of `test` predicted correctly.
    pub fn accuracy(&self, test: &LabeledDataset) -> Result<f64> {
        if test.is_empty() {
            return Err(Error::Input("empty test set".into()));
        }
        let predictions = self.predict_all(test)?;
        Ok(accuracy_of(&predictions, test.labels()))
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }
}

pub fn accuracy_of(predictions: &[usize], labels: &[usize]) -> f64 {
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    correct as f64 / labels.len().max(1) as f64
}
