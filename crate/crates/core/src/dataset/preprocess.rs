//! Crop → mean-pool → vectorise → pixel mask → per-sample max scaling.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{LabeledDataset, RawImageSet};
use crate::error::{Error, Result};

/// Half-open pixel rectangle `[row0, row1) × [col0, col1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropBox {
    pub row0: usize,
    pub col0: usize,
    pub row1: usize,
    pub col1: usize,
}

impl CropBox {
    pub fn full(height: usize, width: usize) -> Self {
        Self {
            row0: 0,
            col0: 0,
            row1: height,
            col1: width,
        }
    }

    /// Largest centred square whose side is a multiple of `grid` and at most
    /// `fraction` of the shorter image side.
    pub fn centered_square(height: usize, width: usize, grid: usize, fraction: f64) -> Self {
        let limit = (height.min(width) as f64 * fraction).floor() as usize;
        let side = (limit / grid).max(1) * grid;
        let row0 = height.saturating_sub(side) / 2;
        let col0 = width.saturating_sub(side) / 2;
        Self {
            row0,
            col0,
            row1: row0 + side,
            col1: col0 + side,
        }
    }

    pub fn height(&self) -> usize {
        self.row1.saturating_sub(self.row0)
    }

    pub fn width(&self) -> usize {
        self.col1.saturating_sub(self.col0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    None,
    #[default]
    MaxScale,
}

/// Which pooled pixels become features, as a boolean vector over the pooled grid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelMask {
    pub active: Vec<bool>,
}

impl PixelMask {
    pub fn from_indices(len: usize, indices: &[usize]) -> Result<Self> {
        let mut active = vec![false; len];
        for &i in indices {
            if i >= len {
                return Err(Error::Config(format!(
                    "mask index {i} outside pooled grid of {len}"
                )));
            }
            active[i] = true;
        }
        Ok(Self { active })
    }

    pub fn count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.active
            .iter()
            .enumerate()
            .filter_map(|(i, &a)| a.then_some(i))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub crop: CropBox,
    pub pool_factor: usize,
    pub feature_count: usize,
    pub pixel_mask: Option<PixelMask>,
    pub normalization: Normalization,
    /// Turn dark-on-light images into bright strokes (`255 - v`).
    #[serde(default)]
    pub invert: bool,
    /// Shift each image so its intensity centroid sits at the image centre
    /// before cropping.
    #[serde(default)]
    pub recenter: bool,
}

impl PreprocessConfig {
    /// 28×28 MNIST → central 24×24 → 2×2 pooling → 85 of 144 pixels.
    pub fn vmnist() -> Self {
        Self {
            crop: CropBox {
                row0: 2,
                col0: 2,
                row1: 26,
                col1: 26,
            },
            pool_factor: 2,
            feature_count: 85,
            pixel_mask: None,
            normalization: Normalization::MaxScale,
            invert: false,
            recenter: false,
        }
    }

    /// Omniglot-style thumbnails: invert, centre by intensity, crop a centred
    /// square, pool to a 12×12 grid and keep `feature_count` pixels.
    pub fn vomniglot(height: usize, width: usize, feature_count: usize) -> Self {
        let crop = CropBox::centered_square(height, width, 12, 0.8);
        Self {
            pool_factor: crop.height() / 12,
            crop,
            feature_count,
            pixel_mask: None,
            normalization: Normalization::MaxScale,
            invert: true,
            recenter: true,
        }
    }

    pub fn pooled_dims(&self) -> (usize, usize) {
        let p = self.pool_factor.max(1);
        (self.crop.height() / p, self.crop.width() / p)
    }

    pub fn pooled_len(&self) -> usize {
        let (h, w) = self.pooled_dims();
        h * w
    }

    fn validate(&self, height: usize, width: usize) -> Result<()> {
        let c = &self.crop;
        if c.row1 > height || c.col1 > width || c.row0 >= c.row1 || c.col0 >= c.col1 {
            return Err(Error::Config(format!(
                "crop box rows {}..{} cols {}..{} does not fit a {height}x{width} image",
                c.row0, c.row1, c.col0, c.col1
            )));
        }
        if self.pool_factor == 0
            || !c.height().is_multiple_of(self.pool_factor)
            || !c.width().is_multiple_of(self.pool_factor)
        {
            return Err(Error::Config(format!(
                "pool factor {} does not tile the {}x{} crop",
                self.pool_factor,
                c.height(),
                c.width()
            )));
        }
        if self.feature_count == 0 || self.pooled_len() < self.feature_count {
            return Err(Error::Config(format!(
                "pooled grid has {} pixels, {} features requested",
                self.pooled_len(),
                self.feature_count
            )));
        }
        if let Some(mask) = &self.pixel_mask {
            if mask.active.len() != self.pooled_len() || mask.count() != self.feature_count {
                return Err(Error::Config(format!(
                    "pixel mask has {} of {} entries set, expected {} of {}",
                    mask.count(),
                    mask.active.len(),
                    self.feature_count,
                    self.pooled_len()
                )));
            }
        }
        Ok(())
    }
}

fn recentered(pixels: &[f64], height: usize, width: usize) -> Vec<f64> {
    let total: f64 = pixels.iter().sum();
    if total <= 0.0 {
        return pixels.to_vec();
    }
    let (mut cr, mut cc) = (0.0, 0.0);
    for r in 0..height {
        for c in 0..width {
            let v = pixels[r * width + c];
            cr += v * r as f64;
            cc += v * c as f64;
        }
    }
    let dr = ((height as f64 - 1.0) / 2.0 - cr / total).round() as isize;
    let dc = ((width as f64 - 1.0) / 2.0 - cc / total).round() as isize;
    let mut out = vec![0.0; pixels.len()];
    for r in 0..height {
        let src_r = r as isize - dr;
        if src_r < 0 || src_r >= height as isize {
            continue;
        }
        for c in 0..width {
            let src_c = c as isize - dc;
            if src_c >= 0 && src_c < width as isize {
                out[r * width + c] = pixels[src_r as usize * width + src_c as usize];
            }
        }
    }
    out
}

/// Crop and mean-pool one image into the pooled grid (row-major).
pub fn pool_image(image: &[u8], height: usize, width: usize, cfg: &PreprocessConfig) -> Vec<f64> {
    let mut px: Vec<f64> = image
        .iter()
        .map(|&v| {
            if cfg.invert {
                255.0 - f64::from(v)
            } else {
                f64::from(v)
            }
        })
        .collect();
    if cfg.recenter {
        px = recentered(&px, height, width);
    }
    let p = cfg.pool_factor;
    let (ph, pw) = cfg.pooled_dims();
    let area = (p * p) as f64;
    let mut out = vec![0.0; ph * pw];
    for (br, row) in out.chunks_exact_mut(pw).enumerate() {
        for (bc, cell) in row.iter_mut().enumerate() {
            let mut sum = 0.0;
            for r in 0..p {
                let base = (cfg.crop.row0 + br * p + r) * width + cfg.crop.col0 + bc * p;
                sum += px[base..base + p].iter().sum::<f64>();
            }
            *cell = sum / area;
        }
    }
    out
}

/// Selects the `feature_count` pooled pixels with the highest mean activity
/// over `calibration`, ties going to the lower index.
pub fn derive_pixel_mask(calibration: &RawImageSet, cfg: &PreprocessConfig) -> Result<PixelMask> {
    let probe = PreprocessConfig {
        pixel_mask: None,
        ..cfg.clone()
    };
    probe.validate(calibration.height, calibration.width)?;
    if calibration.is_empty() {
        return Err(Error::Input(
            "cannot derive a pixel mask from zero images".into(),
        ));
    }
    let mut mean = vec![0.0; cfg.pooled_len()];
    for im in &calibration.images {
        for (m, v) in
            mean.iter_mut()
                .zip(pool_image(im, calibration.height, calibration.width, cfg))
        {
            *m += v;
        }
    }
    let mut order: Vec<usize> = (0..mean.len()).collect();
    order.sort_by(|&a, &b| mean[b].total_cmp(&mean[a]).then(a.cmp(&b)));
    PixelMask::from_indices(mean.len(), &order[..cfg.feature_count])
}

/// Vectorises every image of `raw`. Without an explicit mask, a pooled grid
/// larger than `feature_count` gets a mask derived from `raw` itself.
pub fn preprocess(raw: &RawImageSet, cfg: &PreprocessConfig) -> Result<LabeledDataset> {
    cfg.validate(raw.height, raw.width)?;
    let keep: Option<Vec<usize>> = match &cfg.pixel_mask {
        Some(mask) => Some(mask.indices()),
        None if cfg.pooled_len() == cfg.feature_count => None,
        None => Some(derive_pixel_mask(raw, cfg)?.indices()),
    };
    let d = cfg.feature_count;
    let mut features = Array2::zeros((raw.len(), d));
    for (i, im) in raw.images.iter().enumerate() {
        let pooled = pool_image(im, raw.height, raw.width, cfg);
        let mut row: Vec<f64> = match &keep {
            Some(idx) => idx.iter().map(|&j| pooled[j]).collect(),
            None => pooled,
        };
        if cfg.normalization == Normalization::MaxScale {
            let max = row.iter().copied().fold(0.0, f64::max);
            if max > 0.0 {
                row.iter_mut().for_each(|v| *v /= max);
            }
        }
        features.row_mut(i).assign(&ndarray::Array1::from(row));
    }
    LabeledDataset::new(features, raw.labels.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Source;

    fn constant_set(v: u8, n: usize) -> RawImageSet {
        RawImageSet::new(28, 28, vec![vec![v; 784]; n], vec![0; n], Source::Mnist).unwrap()
    }

    #[test]
    fn zero_image_maps_to_zero_vector() {
        let ds = preprocess(&constant_set(0, 2), &PreprocessConfig::vmnist()).unwrap();
        assert_eq!(ds.dim(), 85);
        assert!(ds.features().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_image_max_scales_to_ones() {
        let ds = preprocess(&constant_set(1, 1), &PreprocessConfig::vmnist()).unwrap();
        assert_eq!(ds.dim(), 85);
        assert!(ds.features().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn block_means_of_a_4x4_image() {
        #[rustfmt::skip]
        let img: Vec<u8> = vec![
            1, 3,   10, 20,
            5, 7,   30, 40,
            0, 0,   100, 0,
            0, 4,   0, 0,
        ];
        let raw = RawImageSet::new(4, 4, vec![img], vec![0], Source::Mnist).unwrap();
        let cfg = PreprocessConfig {
            crop: CropBox::full(4, 4),
            pool_factor: 2,
            feature_count: 4,
            pixel_mask: None,
            normalization: Normalization::None,
            invert: false,
            recenter: false,
        };
        let ds = preprocess(&raw, &cfg).unwrap();
        // (1+3+5+7)/4, (10+20+30+40)/4, (0+0+0+4)/4, (100+0+0+0)/4
        assert_eq!(ds.row(0).to_vec(), vec![4.0, 25.0, 1.0, 25.0]);
    }

    #[test]
    fn crop_out_of_bounds_is_config_error() {
        let mut cfg = PreprocessConfig::vmnist();
        cfg.crop.row1 = 30;
        assert!(matches!(
            preprocess(&constant_set(1, 1), &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn mask_cardinality_mismatch_is_config_error() {
        let mut cfg = PreprocessConfig::vmnist();
        cfg.pixel_mask = Some(PixelMask::from_indices(144, &[0, 1, 2]).unwrap());
        assert!(matches!(
            preprocess(&constant_set(1, 1), &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn derived_mask_prefers_active_pixels() {
        // bright 8x8 square in the middle of a 28x28 image
        let mut img = vec![0u8; 784];
        for r in 10..18 {
            for c in 10..18 {
                img[r * 28 + c] = 200;
            }
        }
        let raw = RawImageSet::new(28, 28, vec![img], vec![0], Source::Mnist).unwrap();
        let mut cfg = PreprocessConfig::vmnist();
        cfg.feature_count = 16;
        let mask = derive_pixel_mask(&raw, &cfg).unwrap();
        assert_eq!(mask.count(), 16);
        // pooled rows/cols 4..8 of the 12x12 grid hold the square
        let expected: Vec<usize> = (4..8)
            .flat_map(|r| (4..8).map(move |c| r * 12 + c))
            .collect();
        assert_eq!(mask.indices(), expected);
    }

    #[test]
    fn recentering_moves_mass_to_the_middle() {
        let mut img = [0u8; 25];
        img[0] = 255; // top-left corner
        let px: Vec<f64> = img.iter().map(|&v| f64::from(v)).collect();
        let out = recentered(&px, 5, 5);
        assert_eq!(out[2 * 5 + 2], 255.0);
        assert_eq!(out.iter().sum::<f64>(), 255.0);
    }

    #[test]
    fn omniglot_preset_geometry() {
        let cfg = PreprocessConfig::vomniglot(105, 105, 120);
        assert_eq!(cfg.crop.height(), 84);
        assert_eq!(cfg.pool_factor, 7);
        assert_eq!(cfg.pooled_len(), 144);
        assert!(cfg.invert && cfg.recenter);
    }
}
