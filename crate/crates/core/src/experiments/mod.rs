//! The repeated few-shot protocol: for every (N, repetition) a stratified
//! split is drawn, each classifier is fitted on raw features (baseline) and
//! again on generator-augmented features (cyborg), and both are scored on
//! the same test rows. Results are aggregated into effect sizes, p-values,
//! gains and data-savings factors.

mod audit;
pub mod data;
pub mod report;
mod runner;
mod stats;

use serde::{Deserialize, Serialize};

use crate::classifiers::{ClassifierKind, ClassifierOptions, MlpOptions};
use crate::error::{Error, Result};
use crate::featuregen::{AugmentMode, AugmentPolicy, GeneratorKind, GeneratorOptions};
use crate::mothnet::Template;

pub use audit::{AuditLog, AuditReport, FitRecord, FitStage};
pub use data::PreparedData;
pub use runner::{run_cell, run_suite, CellError, RunResult, SuiteOutput};
pub use stats::{
    aggregate, data_savings, fd_to_pvalue, fisher_discriminant, AggregateRow, Savings,
};

pub const VMNIST_N_GRID: [usize; 12] = [1, 2, 3, 5, 7, 10, 15, 20, 30, 50, 70, 100];
pub const VOMNIGLOT_N_GRID: [usize; 7] = [1, 2, 3, 5, 7, 10, 15];
/// vOmniglot classes carry 20 images each, 5 of which are held out.
pub const VOMNIGLOT_MAX_N: usize = 15;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    #[default]
    Vmnist,
    Vomniglot,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Vmnist => "vmnist",
            DatasetKind::Vomniglot => "vomniglot",
        }
    }
}

/// One experiment suite. Fields left unset take dataset-dependent defaults
/// in [`ExperimentConfig::resolved`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetKind,
    pub n_grid: Option<Vec<usize>>,
    pub classifiers: Vec<ClassifierKind>,
    pub generators: Vec<GeneratorKind>,
    pub augment_mode: Option<AugmentMode>,
    /// Min-max rescale generated features on the training split.
    pub rescale: bool,
    pub repetitions: usize,
    pub master_seed: u64,
    pub n_test_per_class: Option<usize>,
    /// Classes drawn per run from multi-class pools (vOmniglot, pretraining source).
    pub n_classes: usize,
    pub mothnet: Template,
    pub classifier: ClassifierOptions,
    /// Network behind the NN-output generator.
    pub nn_out: MlpOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetKind::Vmnist,
            n_grid: None,
            classifiers: ClassifierKind::ALL.to_vec(),
            generators: vec![GeneratorKind::MothNet],
            augment_mode: None,
            rescale: true,
            repetitions: 13,
            master_seed: 0,
            n_test_per_class: None,
            n_classes: 10,
            mothnet: Template::default(),
            classifier: ClassifierOptions::default(),
            nn_out: MlpOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn n_grid(&self) -> Vec<usize> {
        self.n_grid.clone().unwrap_or_else(|| match self.dataset {
            DatasetKind::Vmnist => VMNIST_N_GRID.to_vec(),
            DatasetKind::Vomniglot => VOMNIGLOT_N_GRID.to_vec(),
        })
    }

    pub fn augment_mode(&self) -> AugmentMode {
        self.augment_mode.unwrap_or(match self.dataset {
            DatasetKind::Vmnist => AugmentMode::Append,
            DatasetKind::Vomniglot => AugmentMode::Replace,
        })
    }

    pub fn n_test_per_class(&self) -> usize {
        self.n_test_per_class.unwrap_or(match self.dataset {
            DatasetKind::Vmnist => 100,
            DatasetKind::Vomniglot => 5,
        })
    }

    pub fn policy(&self) -> AugmentPolicy {
        AugmentPolicy {
            mode: self.augment_mode(),
            rescale: self.rescale,
        }
    }

    pub fn generator_options(&self) -> GeneratorOptions {
        GeneratorOptions {
            mothnet: self.mothnet.clone(),
            mlp: self.nn_out.clone(),
        }
    }

    /// Copy with every defaulted field filled in, as echoed to manifests.
    pub fn resolved(&self) -> Self {
        Self {
            n_grid: Some(self.n_grid()),
            augment_mode: Some(self.augment_mode()),
            n_test_per_class: Some(self.n_test_per_class()),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.repetitions == 0 {
            return fail("repetitions must be at least 1".into());
        }
        let grid = self.n_grid();
        if grid.is_empty() || grid.contains(&0) {
            return fail("n_grid must be a non-empty list of positive sample counts".into());
        }
        if self.dataset == DatasetKind::Vomniglot {
            if let Some(&n) = grid.iter().find(|&&n| n > VOMNIGLOT_MAX_N) {
                return fail(format!(
                    "vomniglot supports N <= {VOMNIGLOT_MAX_N}, n_grid has {n}"
                ));
            }
        }
        if self.classifiers.is_empty() || self.generators.is_empty() {
            return fail("classifiers and generators must be non-empty".into());
        }
        if self.n_classes < 2 {
            return fail("n_classes must be at least 2".into());
        }
        if self.augment_mode() == AugmentMode::Replace
            && self.generators.contains(&GeneratorKind::None)
        {
            return fail("replace mode cannot be combined with the none generator".into());
        }
        let mut template = self.mothnet.clone();
        template.n_features = template.n_features.max(1);
        template.validate()
    }
}
