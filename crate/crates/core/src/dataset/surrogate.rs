//! MNIST-derived stand-in for an Omniglot image tree.
//!
//! Writes dark-on-light 105×105 PNG thumbnails, one leaf directory per
//! class, with each glyph upscaled 3× and placed at a random offset so that
//! the recentering step has real work to do. Every digit yields two classes:
//! the upright glyph and its transpose.

use std::path::Path;

use image::{GrayImage, Luma};
use rand::seq::SliceRandom;
use rand::Rng;

use super::RawImageSet;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub const CANVAS: usize = 105;
const SCALE: usize = 3;

fn render(glyph: &[u8], side: usize, transpose: bool, dr: usize, dc: usize) -> GrayImage {
    let mut img = GrayImage::from_pixel(CANVAS as u32, CANVAS as u32, Luma([255]));
    for r in 0..side * SCALE {
        for c in 0..side * SCALE {
            let (sr, sc) = (r / SCALE, c / SCALE);
            let v = if transpose {
                glyph[sc * side + sr]
            } else {
                glyph[sr * side + sc]
            };
            img.put_pixel((c + dc) as u32, (r + dr) as u32, Luma([255 - v]));
        }
    }
    img
}

/// Writes `2 × n_digits` classes of `per_class` images under `out`.
/// Returns the number of classes written.
pub fn write_surrogate_tree(
    raw: &RawImageSet,
    out: &Path,
    per_class: usize,
    seed: u64,
) -> Result<usize> {
    if raw.height != raw.width || raw.height * SCALE > CANVAS {
        return Err(Error::Input(format!(
            "surrogate glyphs must be square and at most {}px, got {}x{}",
            CANVAS / SCALE,
            raw.height,
            raw.width
        )));
    }
    let side = raw.height;
    let slack = CANVAS - side * SCALE;
    let mut rng = rng_from_seed(seed);
    let n_digits = raw.labels.iter().max().map_or(0, |m| m + 1);
    let mut written = 0;
    for digit in 0..n_digits {
        let mut rows: Vec<usize> = (0..raw.len()).filter(|&i| raw.labels[i] == digit).collect();
        if rows.len() < 2 * per_class {
            return Err(Error::InsufficientSamples {
                class: digit,
                needed: 2 * per_class,
                available: rows.len(),
            });
        }
        rows.shuffle(&mut rng);
        for (variant, transpose) in [("upright", false), ("transposed", true)] {
            let dir = out.join(format!("digit{digit}")).join(variant);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let offset = if transpose { per_class } else { 0 };
            for (k, &row) in rows[offset..offset + per_class].iter().enumerate() {
                let (dr, dc) = (rng.random_range(0..=slack), rng.random_range(0..=slack));
                let path = dir.join(format!("{k:02}.png"));
                render(&raw.images[row], side, transpose, dr, dc)
                    .save(&path)
                    .map_err(|source| Error::Image { path, source })?;
            }
            written += 1;
        }
    }
    Ok(written)
}
