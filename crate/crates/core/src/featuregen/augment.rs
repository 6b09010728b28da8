use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{FeatureGeneratorModel, GeneratorKind};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentMode {
    /// `[original | generated]`
    #[default]
    Append,
    /// `[generated]` only.
    Replace,
}

impl std::str::FromStr for AugmentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "append" => Ok(AugmentMode::Append),
            "replace" => Ok(AugmentMode::Replace),
            other => Err(Error::Config(format!(
                "unknown augment mode '{other}' (expected append or replace)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentPolicy {
    pub mode: AugmentMode,
    /// Min-max rescale generated features using training-split ranges.
    pub rescale: bool,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        Self {
            mode: AugmentMode::Append,
            rescale: true,
        }
    }
}

/// Per-column affine map onto `[0, 1]` learned from one matrix. Values
/// outside the learned range are clamped; constant columns map to 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(m: &Array2<f64>) -> Self {
        let mut low = vec![f64::INFINITY; m.ncols()];
        let mut high = vec![f64::NEG_INFINITY; m.ncols()];
        for row in m.outer_iter() {
            for (j, &v) in row.iter().enumerate() {
                low[j] = low[j].min(v);
                high[j] = high[j].max(v);
            }
        }
        Self { low, high }
    }

    pub fn apply(&self, m: &Array2<f64>) -> Array2<f64> {
        let mut out = m.clone();
        for mut row in out.outer_iter_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                let width = self.high[j] - self.low[j];
                *v = if width > 0.0 && width.is_finite() {
                    ((*v - self.low[j]) / width).clamp(0.0, 1.0)
                } else {
                    0.0
                };
            }
        }
        out
    }
}

/// A fitted generator plus the rescaling learned on its training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Augmenter {
    pub generator: FeatureGeneratorModel,
    pub policy: AugmentPolicy,
    pub scaler: Option<MinMaxScaler>,
}

impl Augmenter {
    /// `train` must be the split the generator was fitted on.
    pub fn fit(
        generator: FeatureGeneratorModel,
        train: &LabeledDataset,
        policy: AugmentPolicy,
    ) -> Result<Self> {
        if !generator.is_fitted() {
            return Err(Error::State(format!(
                "{} generator used before fit",
                generator.kind
            )));
        }
        if policy.mode == AugmentMode::Replace && generator.kind == GeneratorKind::None {
            return Err(Error::Config(
                "replace mode needs a generator that produces features".into(),
            ));
        }
        let scaler = if policy.rescale && generator.kind != GeneratorKind::None {
            Some(MinMaxScaler::fit(&generator.transform_all(train)?))
        } else {
            None
        };
        Ok(Self {
            generator,
            policy,
            scaler,
        })
    }

    /// Output dimension for inputs of dimension `d`.
    pub fn output_dim(&self, d: usize) -> Result<usize> {
        let k = self.generator.n_new_features()?;
        Ok(match self.policy.mode {
            AugmentMode::Append => d + k,
            AugmentMode::Replace => k,
        })
    }

    /// Same rows and labels as `base`, with features assembled per policy.
    pub fn apply(&self, base: &LabeledDataset) -> Result<LabeledDataset> {
        if self.generator.kind == GeneratorKind::None {
            return Ok(base.clone());
        }
        let mut generated = self.generator.transform_all(base)?;
        if let Some(s) = &self.scaler {
            generated = s.apply(&generated);
        }
        let features = match self.policy.mode {
            AugmentMode::Append => concatenate![Axis(1), base.features().view(), generated.view()],
            AugmentMode::Replace => generated,
        };
        base.with_features(features)
    }
}

/// One-shot form: fit the rescaling on `train`, then assemble `base`.
pub fn augment(
    base: &LabeledDataset,
    train: &LabeledDataset,
    generator: &FeatureGeneratorModel,
    policy: AugmentPolicy,
) -> Result<LabeledDataset> {
    Augmenter::fit(generator.clone(), train, policy)?.apply(base)
}
