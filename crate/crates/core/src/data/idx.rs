//! IDX container format (big-endian header, unsigned-byte payload).

use std::fs;
use std::path::Path;

use super::Dataset;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Length(format!("{what}: header truncated")))
}

pub fn read_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0, "images")?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "images: bad magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"
        )));
    }
    let count = be_u32(bytes, 4, "images")? as usize;
    let rows = be_u32(bytes, 8, "images")? as usize;
    let cols = be_u32(bytes, 12, "images")? as usize;
    let need = count * rows * cols;
    let body = &bytes[16..];
    if body.len() < need {
        return Err(Error::Length(format!(
            "images: expected {need} pixel bytes, found {}",
            body.len()
        )));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: body[..need].to_vec(),
    })
}

pub fn read_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0, "labels")?;
    if magic != LABELS_MAGIC {
        return Err(Error::Format(format!(
            "labels: bad magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"
        )));
    }
    let count = be_u32(bytes, 4, "labels")? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(Error::Length(format!(
            "labels: expected {count} bytes, found {}",
            body.len()
        )));
    }
    Ok(body[..count].to_vec())
}

pub fn write_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [
        IMAGES_MAGIC,
        images.count as u32,
        images.rows as u32,
        images.cols as u32,
    ] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn write_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Loads an image/label IDX pair; pixels are mapped from `[0, 255]` to `[-1, 1]`.
pub fn load_mnist_idx<F: Scalar>(images_path: &Path, labels_path: &Path) -> Result<Dataset<F>> {
    let images = read_idx_images(&fs::read(images_path)?)?;
    let labels = read_idx_labels(&fs::read(labels_path)?)?;
    if images.count != labels.len() {
        return Err(Error::Length(format!(
            "{} images but {} labels",
            images.count,
            labels.len()
        )));
    }
    let d = images.rows * images.cols;
    let data = images
        .pixels
        .iter()
        .map(|&p| F::cst(f64::from(p) / 127.5 - 1.0))
        .collect();
    Dataset::new(
        Tensor::matrix(images.count, d, data)?,
        Some(labels.iter().map(|&l| usize::from(l)).collect()),
        images_path.display().to_string(),
    )
}

/// Inverse of the `[-1, 1]` pixel scaling.
pub fn to_pixel<F: Scalar>(v: F) -> u8 {
    ((v.as_f64() + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
}
