//! Turning raw image sets into the pools the runner draws splits from.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DatasetKind;
use crate::dataset::surrogate::write_surrogate_tree;
use crate::dataset::{
    derive_pixel_mask, load_image_dir, load_mnist_dir, preprocess, read_csv, write_csv,
    LabeledDataset, PixelMask, PreprocessConfig, RawImageSet,
};
use crate::error::{Error, Result};

pub const VMNIST_CSV: &str = "vmnist.csv";
pub const VOMNIGLOT_CSV: &str = "vomniglot.csv";
/// 85-pixel vOmniglot, the pretraining source for vMNIST.
pub const SOURCE_CSV: &str = "vomniglot85.csv";
pub const PREP_JSON: &str = "prep.json";
pub const SURROGATE_DIR: &str = "omniglot_surrogate";

/// Row ids of the pretraining source are shifted by this much so they can
/// never collide with experiment-pool ids in the leakage audit.
pub const SOURCE_ID_OFFSET: u64 = 1 << 40;

/// Immutable inputs shared by every cell of a suite.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub pool: LabeledDataset,
    /// Source set for the PRETRAIN learner, if one was prepared.
    pub pretrain_source: Option<LabeledDataset>,
}

impl PreparedData {
    pub fn new(pool: LabeledDataset) -> Self {
        Self {
            pool,
            pretrain_source: None,
        }
    }

    pub fn with_pretrain_source(mut self, source: LabeledDataset) -> Result<Self> {
        let ids = source
            .row_ids()
            .iter()
            .map(|id| id + SOURCE_ID_OFFSET)
            .collect();
        self.pretrain_source = Some(LabeledDataset::with_row_ids(
            source.features().clone(),
            source.labels().to_vec(),
            ids,
        )?);
        Ok(self)
    }
}

/// Splits indices into (experiment pool, calibration pool): the last
/// `calibration_per_class` images of every class go to calibration.
pub fn calibration_split(
    labels: &[usize],
    calibration_per_class: usize,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut pool = Vec::new();
    let mut calibration = Vec::new();
    for (class, rows) in by_class {
        if rows.len() <= calibration_per_class {
            return Err(Error::InsufficientSamples {
                class,
                needed: calibration_per_class + 1,
                available: rows.len(),
            });
        }
        let cut = rows.len() - calibration_per_class;
        pool.extend_from_slice(&rows[..cut]);
        calibration.extend_from_slice(&rows[cut..]);
    }
    pool.sort_unstable();
    calibration.sort_unstable();
    Ok((pool, calibration))
}

pub struct Vectorised {
    pub data: LabeledDataset,
    pub mask: PixelMask,
    pub config: PreprocessConfig,
}

/// vMNIST: mask from the calibration images, features for the pool images.
pub fn prepare_vmnist(pool: &RawImageSet, calibration: &RawImageSet) -> Result<Vectorised> {
    vectorise(pool, calibration, PreprocessConfig::vmnist())
}

/// vOmniglot with `feature_count` pixels. The mask is label-free and is
/// derived from the whole image set.
pub fn prepare_vomniglot(raw: &RawImageSet, feature_count: usize) -> Result<Vectorised> {
    vectorise(
        raw,
        raw,
        PreprocessConfig::vomniglot(raw.height, raw.width, feature_count),
    )
}

fn vectorise(
    raw: &RawImageSet,
    calibration: &RawImageSet,
    mut config: PreprocessConfig,
) -> Result<Vectorised> {
    let mask = derive_pixel_mask(calibration, &config)?;
    config.pixel_mask = Some(mask.clone());
    let data = preprocess(raw, &config)?;
    Ok(Vectorised { data, mask, config })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepOptions {
    /// Trailing MNIST images per class held out for the pixel mask.
    pub calibration_per_class: usize,
    /// Omniglot-style image tree. Without one, a stand-in tree is generated
    /// from the MNIST calibration images.
    pub omniglot_dir: Option<PathBuf>,
    pub omniglot_classes: usize,
    pub omniglot_features: usize,
    pub surrogate_per_class: usize,
    pub seed: u64,
}

impl Default for PrepOptions {
    fn default() -> Self {
        Self {
            calibration_per_class: 100,
            omniglot_dir: None,
            omniglot_classes: 100,
            omniglot_features: 120,
            surrogate_per_class: 20,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub file: String,
    pub rows: usize,
    pub features: usize,
    pub classes: usize,
    pub mask: Vec<usize>,
    pub preprocess: PreprocessConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrepSummary {
    pub options: PrepOptions,
    pub calibration_images: usize,
    pub omniglot_source: String,
    pub omniglot_is_surrogate: bool,
    pub caches: Vec<CacheEntry>,
}

fn write_cache(out: &Path, file: &str, v: Vectorised) -> Result<CacheEntry> {
    write_csv(&v.data, &out.join(file))?;
    Ok(CacheEntry {
        file: file.into(),
        rows: v.data.n_samples(),
        features: v.data.dim(),
        classes: v.data.n_classes(),
        mask: v.mask.indices(),
        preprocess: v.config,
    })
}

/// Builds the vMNIST, vOmniglot and pretraining-source caches under `out`
/// from the MNIST files in `mnist_dir`. Deterministic: re-running with the
/// same inputs rewrites identical files.
pub fn prepare_cache(mnist_dir: &Path, out: &Path, options: &PrepOptions) -> Result<PrepSummary> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mnist = load_mnist_dir(mnist_dir)?;
    let (pool, calibration) = calibration_split(&mnist.labels, options.calibration_per_class)?;
    let calibration = mnist.subset(&calibration);
    let mut caches = vec![write_cache(
        out,
        VMNIST_CSV,
        prepare_vmnist(&mnist.subset(&pool), &calibration)?,
    )?];

    let (root, surrogate) = match &options.omniglot_dir {
        Some(dir) => (dir.clone(), false),
        None => {
            let dir = out.join(SURROGATE_DIR);
            if dir.exists() {
                std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            }
            write_surrogate_tree(
                &calibration,
                &dir,
                options.surrogate_per_class,
                options.seed,
            )?;
            (dir, true)
        }
    };
    let available = crate::dataset::images::class_dirs(&root)?.len();
    let omniglot = load_image_dir(&root, options.omniglot_classes.min(available), options.seed)
        .map_err(|e| e.context(format!("loading {}", root.display())))?;
    caches.push(write_cache(
        out,
        VOMNIGLOT_CSV,
        prepare_vomniglot(&omniglot, options.omniglot_features)?,
    )?);
    caches.push(write_cache(
        out,
        SOURCE_CSV,
        prepare_vomniglot(&omniglot, 85)?,
    )?);

    let summary = PrepSummary {
        options: options.clone(),
        calibration_images: calibration.len(),
        omniglot_source: root.display().to_string(),
        omniglot_is_surrogate: surrogate,
        caches,
    };
    let path = out.join(PREP_JSON);
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}

fn read_cache(cache: &Path, file: &str) -> Result<LabeledDataset> {
    let path = cache.join(file);
    if !path.is_file() {
        return Err(Error::Input(format!(
            "missing cache file {}; run the prep command for this data directory first",
            path.display()
        )));
    }
    read_csv(&path)
}

/// Loads the pool for `dataset` from a cache directory, plus the
/// pretraining source when `with_source` is set.
pub fn load_prepared(
    cache: &Path,
    dataset: DatasetKind,
    with_source: bool,
) -> Result<PreparedData> {
    let (pool_file, source_file) = match dataset {
        DatasetKind::Vmnist => (VMNIST_CSV, SOURCE_CSV),
        DatasetKind::Vomniglot => (VOMNIGLOT_CSV, VMNIST_CSV),
    };
    let data = PreparedData::new(read_cache(cache, pool_file)?);
    if !with_source {
        return Ok(data);
    }
    let source = read_cache(cache, source_file)?;
    if source.dim() != data.pool.dim() {
        return Err(Error::Config(format!(
            "pretrain source {source_file} has {} features but the {} pool has {}",
            source.dim(),
            dataset.name(),
            data.pool.dim()
        )));
    }
    data.with_pretrain_source(source)
}
