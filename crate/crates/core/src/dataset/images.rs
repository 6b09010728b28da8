//! Directory trees of grayscale PNGs, one leaf directory per class.
//!
//! Nested layouts such as `alphabet/character/*.png` are supported: every
//! directory that directly contains PNG files counts as one class.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use walkdir::WalkDir;

use super::{RawImageSet, Source};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

fn is_png(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// Leaf class directories under `root`, sorted by path.
pub fn class_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    if !root.is_dir() {
        return Err(Error::Input(format!(
            "{} is not a directory",
            root.display()
        )));
    }
    let mut dirs = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::Input(format!("walking {}: {e}", root.display())))?;
        if !entry.file_type().is_dir() {
            continue;
        }
        let has_png = std::fs::read_dir(entry.path())
            .map_err(|e| Error::io(entry.path(), e))?
            .filter_map(|e| e.ok())
            .any(|e| e.path().is_file() && is_png(&e.path()));
        if has_png {
            dirs.push(entry.into_path());
        }
    }
    dirs.sort();
    Ok(dirs)
}

fn png_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_png(p))
        .collect();
    files.sort();
    Ok(files)
}

/// Loads `class_count` classes chosen at random (deterministically from
/// `seed`) from the tree at `root`. Labels follow the sorted order of the
/// chosen class paths.
pub fn load_image_dir(root: &Path, class_count: usize, seed: u64) -> Result<RawImageSet> {
    let mut dirs = class_dirs(root)?;
    if dirs.len() < class_count {
        return Err(Error::InsufficientClasses {
            requested: class_count,
            available: dirs.len(),
        });
    }
    dirs.shuffle(&mut rng_from_seed(seed));
    dirs.truncate(class_count);
    dirs.sort();

    let mut images = Vec::new();
    let mut labels = Vec::new();
    let mut shape: Option<(usize, usize)> = None;
    for (label, dir) in dirs.iter().enumerate() {
        for file in png_files(dir)? {
            let img = image::open(&file)
                .map_err(|source| Error::Image {
                    path: file.clone(),
                    source,
                })?
                .to_luma8();
            let dims = (img.height() as usize, img.width() as usize);
            match shape {
                None => shape = Some(dims),
                Some(s) if s != dims => {
                    return Err(Error::Format(format!(
                        "{} is {}x{}, earlier images are {}x{}",
                        file.display(),
                        dims.0,
                        dims.1,
                        s.0,
                        s.1
                    )))
                }
                _ => {}
            }
            images.push(img.into_raw());
            labels.push(label);
        }
    }
    let (height, width) = shape.unwrap_or((0, 0));
    let mut set = RawImageSet::new(height, width, images, labels, Source::Omniglot)?;
    set.class_names = dirs
        .iter()
        .map(|d| {
            d.strip_prefix(root)
                .unwrap_or(d)
                .to_string_lossy()
                .replace('\\', "/")
        })
        .collect();
    Ok(set)
}
