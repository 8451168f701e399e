//! Labelled feature matrices: CSV and IDX ingestion plus a Gaussian-blob
//! generator for desk-scale runs.

use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::run_rng;
use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// `n` samples of dimension `d`, row-major, with labels in `[0, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    n: usize,
    d: usize,
    k: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<usize>, d: usize, k: usize) -> Result<Self> {
        let n = labels.len();
        if n == 0 || d == 0 || k == 0 {
            return Err(Error::ShapeMismatch(format!("empty dataset (n = {n}, d = {d}, k = {k})")));
        }
        if features.len() != n * d {
            return Err(Error::ShapeMismatch(format!(
                "{} feature values for {n} samples of dimension {d}",
                features.len()
            )));
        }
        if let Some(index) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, l)| **l >= k) {
            return Err(Error::LabelOutOfRange { index, label: label as i64, classes: k });
        }
        Ok(Self { features, labels, n, d, k })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case")]
pub enum DatasetFormat {
    /// One row per sample; the last column is the integer label.
    Csv { path: String },
    /// An IDX image file (`0x00000803`) and its label file (`0x00000801`).
    Idx { images: String, labels: String },
}

pub fn load_dataset(format: &DatasetFormat) -> Result<Dataset> {
    match format {
        DatasetFormat::Csv { path } => load_csv(path),
        DatasetFormat::Idx { images, labels } => load_idx(images, labels),
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let bytes = read(path.as_ref())?;
    let text = String::from_utf8(bytes).map_err(|e| Error::Parse {
        location: path.as_ref().display().to_string(),
        message: e.to_string(),
    })?;
    parse_csv(&text)
}

/// Parse CSV text; `K` is inferred as the largest label plus one.
pub fn parse_csv(text: &str) -> Result<Dataset> {
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let at = |col: usize| format!("line {}, column {}", lineno + 1, col + 1);
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() < 2 {
            return Err(Error::Parse { location: at(0), message: "need at least one feature and a label".into() });
        }
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(Error::Parse {
                    location: at(0),
                    message: format!("expected {w} columns, found {}", cells.len()),
                })
            }
            _ => {}
        }
        let (label_cell, feature_cells) = cells.split_last().unwrap();
        for (col, cell) in feature_cells.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Parse { location: at(col), message: format!("not a number: `{cell}`") })?;
            if !v.is_finite() {
                return Err(Error::Parse { location: at(col), message: "non-finite feature".into() });
            }
            features.push(v);
        }
        let label: i64 = label_cell.parse().map_err(|_| Error::Parse {
            location: at(cells.len() - 1),
            message: format!("not an integer label: `{label_cell}`"),
        })?;
        if label < 0 {
            return Err(Error::LabelOutOfRange { index: labels.len(), label, classes: 0 });
        }
        labels.push(label as usize);
    }
    let width = width.ok_or_else(|| Error::Parse { location: "line 1".into(), message: "no rows".into() })?;
    let k = labels.iter().max().copied().unwrap_or(0) + 1;
    Dataset::new(features, labels, width - 1, k)
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Parse { location: format!("byte {offset}"), message: "truncated IDX header".into() })
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let found = be_u32(bytes, 0)?;
    if found != expected {
        return Err(Error::MagicMismatch { expected, found });
    }
    Ok(())
}

fn check_payload(bytes: &[u8], header: usize, expected: usize) -> Result<()> {
    let got = bytes.len() - header;
    if got != expected {
        return Err(Error::Parse {
            location: format!("byte {header}"),
            message: format!("IDX payload has {got} bytes, header promises {expected}"),
        });
    }
    Ok(())
}

/// Parse an IDX label file.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, IDX_LABELS_MAGIC)?;
    let count = be_u32(bytes, 4)? as usize;
    check_payload(bytes, 8, count)?;
    Ok(bytes[8..].to_vec())
}

/// Parse an IDX image file into `(count, rows * cols, pixels in [0, 1])`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    check_magic(bytes, IDX_IMAGES_MAGIC)?;
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let d = rows * cols;
    check_payload(bytes, 16, count * d)?;
    let pixels = bytes[16..].iter().map(|&p| p as f64 / 255.0).collect();
    Ok((count, d, pixels))
}

pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset> {
    let (count, d, pixels) = parse_idx_images(&read(images.as_ref())?)?;
    let raw_labels = parse_idx_labels(&read(labels.as_ref())?)?;
    if raw_labels.len() != count {
        return Err(Error::ShapeMismatch(format!("{count} images but {} labels", raw_labels.len())));
    }
    let labels: Vec<usize> = raw_labels.iter().map(|&l| l as usize).collect();
    let k = labels.iter().max().copied().unwrap_or(0) + 1;
    Dataset::new(pixels, labels, d, k)
}

/// `n` points in `k` balanced classes. Class centers are drawn from
/// `N(0, separation^2 I)` and each point adds `N(0, I)` noise, so smaller
/// `separation` gives more class overlap.
pub fn gaussian_blobs(n: usize, d: usize, k: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || d == 0 || k == 0 {
        return Err(Error::ShapeMismatch("blob generator needs n, d, k >= 1".into()));
    }
    let mut rng = run_rng(seed);
    let center_dist = Normal::new(0.0, separation)
        .map_err(|e| Error::InvalidConfig(format!("separation: {e}")))?;
    let noise = Normal::new(0.0, 1.0).unwrap();
    let centers: Vec<f64> = (0..k * d).map(|_| center_dist.sample(&mut rng)).collect();
    let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    labels.shuffle(&mut rng);
    let mut features = Vec::with_capacity(n * d);
    for &label in &labels {
        let c = &centers[label * d..(label + 1) * d];
        features.extend(c.iter().map(|ci| ci + noise.sample(&mut rng)));
    }
    Dataset::new(features, labels, d, k)
}
