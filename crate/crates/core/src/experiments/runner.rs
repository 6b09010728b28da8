//! Cell execution. The unit of work is one (N, repetition): a single split
//! is drawn, baselines are fitted once per classifier, each generator is
//! fitted once, and every (classifier, generator) pair is scored on it.

use serde::{Deserialize, Serialize};

use super::audit::{AuditLog, FitStage};
use super::data::PreparedData;
use super::stats::{aggregate, AggregateRow};
use super::ExperimentConfig;
use crate::classifiers::{Classifier, ClassifierKind, ClassifierOptions, MlpOptions};
use crate::dataset::{sample_split, select_classes, split_hash, LabeledDataset, SplitSpec};
use crate::error::{Error, Result};
use crate::featuregen::{
    pretrain_mlp, Augmenter, FeatureGeneratorModel, GeneratorKind, GeneratorState,
};
use crate::par::{self, Execution};
use crate::rng::{derive_seed, tag};

/// Outcome of one (N, classifier, generator, repetition) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub n: usize,
    pub classifier: ClassifierKind,
    pub generator: GeneratorKind,
    pub repetition: usize,
    pub baseline_accuracy: f64,
    pub treated_accuracy: f64,
    /// Standalone MothNet test accuracy, for MothNet generators.
    pub mothnet_accuracy: Option<f64>,
    pub split_seed: u64,
    pub generator_seed: u64,
    pub baseline_seed: u64,
    pub treated_seed: u64,
    pub baseline_train_hash: u64,
    pub baseline_test_hash: u64,
    pub treated_train_hash: u64,
    pub treated_test_hash: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellError {
    pub n: usize,
    pub classifier: ClassifierKind,
    pub generator: GeneratorKind,
    pub repetition: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteOutput {
    pub results: Vec<RunResult>,
    pub errors: Vec<CellError>,
    pub aggregate: Vec<AggregateRow>,
}

struct Seeds {
    master: u64,
    n: usize,
    rep: usize,
}

impl Seeds {
    fn split(&self) -> u64 {
        derive_seed(&[self.master, self.n as u64, self.rep as u64])
    }

    fn generator(&self, g: GeneratorKind) -> u64 {
        derive_seed(&[self.master, self.n as u64, self.rep as u64, tag(g.name())])
    }

    fn classifier(&self, c: ClassifierKind, g: GeneratorKind) -> u64 {
        derive_seed(&[
            self.master,
            self.n as u64,
            self.rep as u64,
            tag(c.name()),
            tag(g.name()),
        ])
    }
}

fn options_with_seed(options: &ClassifierOptions, seed: u64) -> ClassifierOptions {
    ClassifierOptions {
        mlp: MlpOptions {
            seed,
            ..options.mlp.clone()
        },
        ..options.clone()
    }
}

struct Split {
    train: LabeledDataset,
    test: LabeledDataset,
    train_hash: u64,
    test_hash: u64,
}

fn draw_split(cfg: &ExperimentConfig, data: &PreparedData, seeds: &Seeds) -> Result<Split> {
    let seed = seeds.split();
    let pool = if data.pool.n_classes() == cfg.n_classes {
        data.pool.clone()
    } else {
        select_classes(
            &data.pool,
            cfg.n_classes,
            derive_seed(&[seed, tag("classes")]),
        )?
    };
    let (train, test) = sample_split(
        &pool,
        &SplitSpec {
            n_train_per_class: seeds.n,
            n_test_per_class: cfg.n_test_per_class(),
            seed,
        },
    )?;
    Ok(Split {
        train_hash: split_hash(&train),
        test_hash: split_hash(&test),
        train,
        test,
    })
}

/// Per-generator state shared by all classifiers in a unit.
enum Treatment {
    Features {
        train: LabeledDataset,
        test: LabeledDataset,
        mothnet_accuracy: Option<f64>,
    },
    Pretrain {
        source: LabeledDataset,
    },
}

fn prepare_treatment(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    split: &Split,
    seeds: &Seeds,
    generator: GeneratorKind,
    audit: Option<&AuditLog>,
) -> Result<Treatment> {
    let seed = seeds.generator(generator);
    if generator == GeneratorKind::Pretrain {
        let source = data
            .pretrain_source
            .as_ref()
            .ok_or_else(|| Error::Config("pretrain needs a pretraining source set".into()))?;
        let source = if source.n_classes() == cfg.n_classes {
            source.clone()
        } else {
            select_classes(source, cfg.n_classes, seed)?
        };
        return Ok(Treatment::Pretrain { source });
    }
    let model =
        FeatureGeneratorModel::fit(generator, &split.train, &cfg.generator_options(), seed)?;
    for w in &model.warnings {
        log::warn!("N={} rep={}: {w}", seeds.n, seeds.rep);
    }
    let mothnet_accuracy = match &model.state {
        Some(GeneratorState::MothNet { net, stats }) => Some(net.accuracy(stats, &split.test)?),
        _ => None,
    };
    let augmenter = Augmenter::fit(model, &split.train, cfg.policy())?;
    if let Some(a) = audit {
        let ids = split.train.row_ids();
        a.fit(
            seeds.n,
            seeds.rep,
            FitStage::Generator,
            generator.to_string(),
            ids,
        );
        if augmenter.scaler.is_some() {
            a.fit(
                seeds.n,
                seeds.rep,
                FitStage::Rescaler,
                generator.to_string(),
                ids,
            );
        }
    }
    Ok(Treatment::Features {
        train: augmenter.apply(&split.train)?,
        test: augmenter.apply(&split.test)?,
        mothnet_accuracy,
    })
}

#[allow(clippy::too_many_arguments)]
fn score_treated(
    cfg: &ExperimentConfig,
    split: &Split,
    seeds: &Seeds,
    classifier: ClassifierKind,
    generator: GeneratorKind,
    treatment: &Treatment,
    baseline_accuracy: f64,
    audit: Option<&AuditLog>,
) -> Result<Option<RunResult>> {
    let treated_seed = seeds.classifier(classifier, generator);
    let label = format!("{classifier}/{generator}");
    let (accuracy, mothnet_accuracy, train_hash, test_hash) = match treatment {
        Treatment::Features {
            train,
            test,
            mothnet_accuracy,
        } => {
            let model = Classifier::fit(
                classifier,
                train,
                &options_with_seed(&cfg.classifier, treated_seed),
            )?;
            if let Some(a) = audit {
                a.fit(
                    seeds.n,
                    seeds.rep,
                    FitStage::Treated,
                    label,
                    train.row_ids(),
                );
            }
            (
                model.accuracy(test)?,
                *mothnet_accuracy,
                split_hash(train),
                split_hash(test),
            )
        }
        Treatment::Pretrain { source } => {
            if classifier != ClassifierKind::Mlp {
                return Ok(None);
            }
            let source_options = MlpOptions {
                seed: derive_seed(&[treated_seed, tag("source")]),
                ..cfg.classifier.mlp.clone()
            };
            let target_options = MlpOptions {
                seed: treated_seed,
                ..cfg.classifier.mlp.clone()
            };
            let model = pretrain_mlp(source, &split.train, &source_options, &target_options)?;
            if let Some(a) = audit {
                a.fit(
                    seeds.n,
                    seeds.rep,
                    FitStage::PretrainSource,
                    label.clone(),
                    source.row_ids(),
                );
                a.fit(
                    seeds.n,
                    seeds.rep,
                    FitStage::Treated,
                    label,
                    split.train.row_ids(),
                );
            }
            (
                model.accuracy(&split.test)?,
                None,
                split.train_hash,
                split.test_hash,
            )
        }
    };
    Ok(Some(RunResult {
        n: seeds.n,
        classifier,
        generator,
        repetition: seeds.rep,
        baseline_accuracy,
        treated_accuracy: accuracy,
        mothnet_accuracy,
        split_seed: seeds.split(),
        generator_seed: seeds.generator(generator),
        baseline_seed: seeds.classifier(classifier, GeneratorKind::None),
        treated_seed,
        baseline_train_hash: split.train_hash,
        baseline_test_hash: split.test_hash,
        treated_train_hash: train_hash,
        treated_test_hash: test_hash,
    }))
}

type CellOutcome = std::result::Result<RunResult, CellError>;

/// Runs every (classifier, generator) pair for one (N, repetition).
fn run_unit(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    n: usize,
    rep: usize,
    classifiers: &[ClassifierKind],
    generators: &[GeneratorKind],
    audit: Option<&AuditLog>,
) -> Vec<CellOutcome> {
    let seeds = Seeds {
        master: cfg.master_seed,
        n,
        rep,
    };
    let cell_error = |c: ClassifierKind, g: GeneratorKind, message: String| CellError {
        n,
        classifier: c,
        generator: g,
        repetition: rep,
        message,
    };
    let all_failed = |message: String| -> Vec<CellOutcome> {
        classifiers
            .iter()
            .flat_map(|&c| generators.iter().map(move |&g| (c, g)))
            .filter(|&(c, g)| g != GeneratorKind::Pretrain || c == ClassifierKind::Mlp)
            .map(|(c, g)| Err(cell_error(c, g, message.clone())))
            .collect()
    };

    let split = match draw_split(cfg, data, &seeds) {
        Ok(s) => s,
        Err(e) => return all_failed(format!("N={n} rep={rep}: drawing split: {e}")),
    };
    if let Some(a) = audit {
        a.test_rows(n, rep, split.test.row_ids());
    }

    let baselines: Vec<std::result::Result<f64, String>> = classifiers
        .iter()
        .map(|&c| {
            let seed = seeds.classifier(c, GeneratorKind::None);
            let model = Classifier::fit(c, &split.train, &options_with_seed(&cfg.classifier, seed))
                .map_err(|e| e.to_string())?;
            if let Some(a) = audit {
                a.fit(
                    n,
                    rep,
                    FitStage::Baseline,
                    c.to_string(),
                    split.train.row_ids(),
                );
            }
            model.accuracy(&split.test).map_err(|e| e.to_string())
        })
        .collect();

    let mut out = Vec::new();
    for &g in generators {
        let treatment =
            prepare_treatment(cfg, data, &split, &seeds, g, audit).map_err(|e| e.to_string());
        for (&c, baseline) in classifiers.iter().zip(&baselines) {
            if g == GeneratorKind::Pretrain && c != ClassifierKind::Mlp {
                continue;
            }
            let context = format!("N={n} rep={rep} {c}/{g}");
            let outcome = match (&treatment, baseline) {
                (Err(e), _) => Err(format!("{context}: fitting generator: {e}")),
                (_, Err(e)) => Err(format!("{context}: baseline: {e}")),
                (Ok(t), Ok(b)) => score_treated(cfg, &split, &seeds, c, g, t, *b, audit)
                    .map_err(|e| format!("{context}: {e}")),
            };
            match outcome {
                Ok(Some(r)) => {
                    log::info!(
                        "N={n} rep={rep} {c}/{g}: baseline {:.3} treated {:.3}",
                        r.baseline_accuracy,
                        r.treated_accuracy
                    );
                    out.push(Ok(r));
                }
                Ok(None) => {}
                Err(message) => {
                    log::error!("{message}");
                    out.push(Err(cell_error(c, g, message)));
                }
            }
        }
    }
    out
}

/// One cell on its own. Produces exactly the result the same cell has
/// inside [`run_suite`].
pub fn run_cell(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    n: usize,
    classifier: ClassifierKind,
    generator: GeneratorKind,
    repetition: usize,
) -> Result<RunResult> {
    cfg.validate()?;
    if generator == GeneratorKind::Pretrain && classifier != ClassifierKind::Mlp {
        return Err(Error::Config(format!(
            "pretrain applies to the mlp only, not {classifier}"
        )));
    }
    match run_unit(cfg, data, n, repetition, &[classifier], &[generator], None).pop() {
        Some(Ok(r)) => Ok(r),
        Some(Err(e)) => Err(Error::Input(e.message)),
        None => Err(Error::State("cell produced no result".into())),
    }
}

/// Runs the full grid. (N, repetition) units run concurrently under
/// `exec`; output order and content do not depend on it. Cell failures are
/// collected in [`SuiteOutput::errors`] and do not stop the suite.
pub fn run_suite(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    exec: Execution,
    audit: Option<&AuditLog>,
) -> Result<SuiteOutput> {
    cfg.validate()?;
    let units: Vec<(usize, usize)> = cfg
        .n_grid()
        .into_iter()
        .flat_map(|n| (0..cfg.repetitions).map(move |r| (n, r)))
        .collect();
    let outcomes = par::map(exec, &units, |&(n, rep)| {
        run_unit(cfg, data, n, rep, &cfg.classifiers, &cfg.generators, audit)
    });
    let mut output = SuiteOutput::default();
    for outcome in outcomes.into_iter().flatten() {
        match outcome {
            Ok(r) => output.results.push(r),
            Err(e) => output.errors.push(e),
        }
    }
    output.aggregate = aggregate(&output.results);
    Ok(output)
}
