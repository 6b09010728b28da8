//! Feature generators and cyborg feature assembly.
//!
//! A generator is fitted on a training split and then maps any sample to a
//! short vector of new features (10 for ten-class data). [`Augmenter`] turns
//! generated features into classifier inputs: it learns a min-max rescaling
//! from the training split and either appends the result to the original
//! features or replaces them.

mod augment;
mod pca;
mod pls;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::classifiers::{Classifier, Mlp, MlpOptions};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::mothnet::{MothNet, ReadoutStats, Template};

pub use augment::{augment, AugmentMode, AugmentPolicy, Augmenter, MinMaxScaler};
pub use pca::{fit_pca, Projection};
pub use pls::{fit_pls, PlsComponents};

/// Number of generated features for the projection methods.
pub const N_NEW_FEATURES: usize = 10;

/// Added inside the log of NN-output features.
pub const NN_LOG_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Identity: no generated features.
    None,
    #[serde(rename = "mothnet")]
    MothNet,
    /// MothNet with the AL's lateral inhibition switched off.
    #[serde(rename = "mothnet_passthrough", alias = "mothnet_passthrough_al")]
    MothNetPassThrough,
    Pca,
    Pls,
    NnOut,
    /// MLP initialised by training on a separate source set. Not a feature
    /// generator; the experiment runner handles it as a classifier variant.
    Pretrain,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 7] = [
        GeneratorKind::None,
        GeneratorKind::MothNet,
        GeneratorKind::MothNetPassThrough,
        GeneratorKind::Pca,
        GeneratorKind::Pls,
        GeneratorKind::NnOut,
        GeneratorKind::Pretrain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::None => "none",
            GeneratorKind::MothNet => "mothnet",
            GeneratorKind::MothNetPassThrough => "mothnet_passthrough",
            GeneratorKind::Pca => "pca",
            GeneratorKind::Pls => "pls",
            GeneratorKind::NnOut => "nn_out",
            GeneratorKind::Pretrain => "pretrain",
        }
    }

    /// Whether the kind produces features (everything except `Pretrain`).
    pub fn is_feature_generator(self) -> bool {
        self != GeneratorKind::Pretrain
    }

    pub fn is_mothnet(self) -> bool {
        matches!(
            self,
            GeneratorKind::MothNet | GeneratorKind::MothNetPassThrough
        )
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        let alias = match key.as_str() {
            "mothnet_passthrough_al" | "passthrough" => "mothnet_passthrough",
            "nn" => "nn_out",
            other => other,
        };
        GeneratorKind::ALL
            .into_iter()
            .find(|k| k.name() == alias)
            .ok_or_else(|| {
                let known: Vec<_> = GeneratorKind::ALL.iter().map(|k| k.name()).collect();
                Error::Config(format!(
                    "unknown generator '{s}' (expected one of {})",
                    known.join(", ")
                ))
            })
    }
}

/// Settings shared by the generators that train something.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorOptions {
    /// MothNet template; `n_features` is overwritten with the data dimension.
    pub mothnet: Template,
    /// Options for the NN-output generator's network.
    pub mlp: MlpOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)] // one per fitted model, never stored in bulk
pub enum GeneratorState {
    None,
    Projection(Projection),
    NnOut(Mlp),
    MothNet { net: MothNet, stats: ReadoutStats },
}

/// A generator kind with its fitted state (absent until fitted).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureGeneratorModel {
    pub kind: GeneratorKind,
    pub state: Option<GeneratorState>,
    /// Input dimension seen at fit time.
    pub dim: usize,
    /// Non-fatal fit diagnostics such as zero-padded components.
    pub warnings: Vec<String>,
}

impl FeatureGeneratorModel {
    pub fn unfitted(kind: GeneratorKind) -> Self {
        Self {
            kind,
            state: None,
            dim: 0,
            warnings: Vec::new(),
        }
    }

    /// Fits `kind` on `train` only. `seed` drives every random draw.
    pub fn fit(
        kind: GeneratorKind,
        train: &LabeledDataset,
        options: &GeneratorOptions,
        seed: u64,
    ) -> Result<Self> {
        let mut warnings = Vec::new();
        let state = match kind {
            GeneratorKind::None => GeneratorState::None,
            GeneratorKind::Pca | GeneratorKind::Pls => {
                let p = if kind == GeneratorKind::Pca {
                    fit_pca(train, N_NEW_FEATURES)?
                } else {
                    fit_pls(train, N_NEW_FEATURES)?
                };
                if p.n_active < N_NEW_FEATURES {
                    warnings.push(format!(
                        "{kind}: {} of {N_NEW_FEATURES} components are zero padding",
                        N_NEW_FEATURES - p.n_active
                    ));
                }
                GeneratorState::Projection(p)
            }
            GeneratorKind::NnOut => GeneratorState::NnOut(fit_nn_features(
                train,
                &MlpOptions {
                    seed,
                    ..options.mlp.clone()
                },
            )?),
            GeneratorKind::MothNet | GeneratorKind::MothNetPassThrough => {
                let mut template = options.mothnet.clone();
                template.n_features = train.dim();
                if kind == GeneratorKind::MothNetPassThrough {
                    template = template.pass_through();
                }
                let (net, stats) = fit_mothnet(&template, train, seed)?;
                GeneratorState::MothNet { net, stats }
            }
            GeneratorKind::Pretrain => {
                return Err(Error::Config(
                    "pretrain is a classifier initialisation, not a feature generator".into(),
                ))
            }
        };
        Ok(Self {
            kind,
            state: Some(state),
            dim: train.dim(),
            warnings,
        })
    }

    pub fn is_fitted(&self) -> bool {
        self.state.is_some()
    }

    fn state(&self) -> Result<&GeneratorState> {
        self.state
            .as_ref()
            .ok_or_else(|| Error::State(format!("{} generator used before fit", self.kind)))
    }

    /// Length of the vectors returned by [`Self::transform`].
    pub fn n_new_features(&self) -> Result<usize> {
        Ok(match self.state()? {
            GeneratorState::None => 0,
            GeneratorState::Projection(p) => p.n_components(),
            GeneratorState::NnOut(m) => m.n_classes(),
            GeneratorState::MothNet { net, .. } => net.n_readouts(),
        })
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        let state = self.state()?;
        if x.len() != self.dim {
            return Err(Error::Input(format!(
                "{} generator was fit on {} features, got {}",
                self.kind,
                self.dim,
                x.len()
            )));
        }
        match state {
            GeneratorState::None => Ok(Vec::new()),
            GeneratorState::Projection(p) => Ok(p.apply(x)),
            GeneratorState::NnOut(m) => {
                let row = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("row shape");
                Ok(nn_log_features(
                    m.probabilities(&row).row(0).as_slice().expect("contiguous"),
                ))
            }
            GeneratorState::MothNet { net, .. } => net.extract_features(x),
        }
    }

    /// Generated features for every row of `data`, one row per sample.
    pub fn transform_all(&self, data: &LabeledDataset) -> Result<Array2<f64>> {
        let k = self.n_new_features()?;
        if data.dim() != self.dim {
            return Err(Error::Input(format!(
                "{} generator was fit on {} features, got {}",
                self.kind,
                self.dim,
                data.dim()
            )));
        }
        let mut out = Array2::zeros((data.n_samples(), k));
        if let GeneratorState::NnOut(m) = self.state()? {
            let p = m.probabilities(data.features());
            for (mut row, probs) in out.outer_iter_mut().zip(p.outer_iter()) {
                row.assign(&ndarray::Array1::from(nn_log_features(&probs.to_vec())));
            }
            return Ok(out);
        }
        for i in 0..data.n_samples() {
            let f = self.transform(&data.row(i).to_vec())?;
            out.row_mut(i).assign(&ndarray::Array1::from(f));
        }
        Ok(out)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }
}

/// `ln(p + ε)` for every output probability.
pub fn nn_log_features(probabilities: &[f64]) -> Vec<f64> {
    probabilities
        .iter()
        .map(|p| (p + NN_LOG_EPS).ln())
        .collect()
}

pub fn fit_nn_features(train: &LabeledDataset, options: &MlpOptions) -> Result<Mlp> {
    Mlp::fit(train, options)
}

/// Generates a MothNet from `template` and trains it on `train`. The
/// instance seed and the training-order seed both derive from `seed`.
pub fn fit_mothnet(
    template: &Template,
    train: &LabeledDataset,
    seed: u64,
) -> Result<(MothNet, ReadoutStats)> {
    use crate::rng::derive_seed;
    let mut net = MothNet::generate(template, derive_seed(&[seed, 0]))?;
    let stats = net.train(train, derive_seed(&[seed, 1]))?;
    Ok((net, stats))
}

/// Fits an MLP on `source`, then keeps training the same weights on
/// `target` (transfer learning). Both sets must share a feature dimension.
pub fn pretrain_mlp(
    source: &LabeledDataset,
    target: &LabeledDataset,
    source_options: &MlpOptions,
    target_options: &MlpOptions,
) -> Result<Classifier> {
    if source.dim() != target.dim() {
        return Err(Error::Input(format!(
            "pretraining source has {} features, target has {}",
            source.dim(),
            target.dim()
        )));
    }
    let initial = Mlp::fit(source, source_options)?;
    let (model, _) = initial.continue_training(target, target_options)?;
    Ok(Classifier::Mlp(model))
}
