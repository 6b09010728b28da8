//! IDX container format (big-endian header, `u8` payload) as used by MNIST.
//! Files may be stored gzip-compressed; [`read_idx_file`] detects that.

use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;

use super::{RawImageSet, Source};
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize) -> Option<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

fn check_magic(bytes: &[u8], expected: u32, header_len: usize) -> Result<()> {
    let magic = read_u32(bytes, 0)
        .ok_or_else(|| Error::Format("stream too short for an IDX magic number".into()))?;
    if magic != expected {
        return Err(Error::Format(format!(
            "bad IDX magic 0x{magic:08x}, expected 0x{expected:08x}"
        )));
    }
    if bytes.len() < header_len {
        return Err(Error::Format(format!(
            "IDX header needs {header_len} bytes, stream has {}",
            bytes.len()
        )));
    }
    Ok(())
}

/// Returns `(rows, cols, images)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<Vec<u8>>)> {
    check_magic(bytes, IMAGES_MAGIC, 16)?;
    let count = read_u32(bytes, 4).unwrap_or(0) as usize;
    let rows = read_u32(bytes, 8).unwrap_or(0) as usize;
    let cols = read_u32(bytes, 12).unwrap_or(0) as usize;
    let size = rows * cols;
    let payload = &bytes[16..];
    if payload.len() < count * size {
        return Err(Error::Truncation(format!(
            "header declares {count} images of {rows}x{cols} but payload holds {} bytes ({} images)",
            payload.len(),
            payload.len().checked_div(size).unwrap_or(0)
        )));
    }
    let images = payload[..count * size]
        .chunks_exact(size.max(1))
        .take(count)
        .map(<[u8]>::to_vec)
        .collect();
    Ok((rows, cols, images))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    check_magic(bytes, LABELS_MAGIC, 8)?;
    let count = read_u32(bytes, 4).unwrap_or(0) as usize;
    let payload = &bytes[8..];
    if payload.len() < count {
        return Err(Error::Truncation(format!(
            "header declares {count} labels but payload holds {}",
            payload.len()
        )));
    }
    Ok(payload[..count].iter().map(|&b| usize::from(b)).collect())
}

/// Parses an image file and its label file into one set.
pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<RawImageSet> {
    let (rows, cols, images) = parse_idx_images(images)?;
    let labels = parse_idx_labels(labels)?;
    if images.len() != labels.len() {
        return Err(Error::Format(format!(
            "{} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    RawImageSet::new(rows, cols, images, labels, Source::Mnist)
}

pub fn serialize_idx_images(set: &RawImageSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + set.len() * set.height * set.width);
    for word in [
        IMAGES_MAGIC,
        set.len() as u32,
        set.height as u32,
        set.width as u32,
    ] {
        out.extend_from_slice(&word.to_be_bytes());
    }
    for im in &set.images {
        out.extend_from_slice(im);
    }
    out
}

/// Labels are stored as single bytes; ids above 255 are truncated.
pub fn serialize_idx_labels(set: &RawImageSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + set.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(set.len() as u32).to_be_bytes());
    out.extend(set.labels.iter().map(|&l| l as u8));
    out
}

/// Reads a file, transparently inflating gzip content.
pub fn read_idx_file(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

const IMAGE_NAMES: [&str; 2] = ["train-images-idx3-ubyte", "train-images.idx3-ubyte"];
const LABEL_NAMES: [&str; 2] = ["train-labels-idx1-ubyte", "train-labels.idx1-ubyte"];

fn find_file(dir: &Path, stems: &[&str]) -> Option<PathBuf> {
    stems
        .iter()
        .flat_map(|s| [dir.join(s), dir.join(format!("{s}.gz"))])
        .find(|p| p.is_file())
}

/// Loads the MNIST training images and labels from `dir`.
pub fn load_mnist_dir(dir: &Path) -> Result<RawImageSet> {
    let missing = |stems: &[&str]| {
        Error::Input(format!(
            "missing MNIST file in {}: expected {} (optionally .gz)",
            dir.display(),
            stems.join(" or ")
        ))
    };
    let images = find_file(dir, &IMAGE_NAMES).ok_or_else(|| missing(&IMAGE_NAMES))?;
    let labels = find_file(dir, &LABEL_NAMES).ok_or_else(|| missing(&LABEL_NAMES))?;
    parse_idx(&read_idx_file(&images)?, &read_idx_file(&labels)?)
        .map_err(|e| e.context(format!("parsing {}", images.display())))
}
