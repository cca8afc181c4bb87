use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, Rng};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Labelled examples: an `N × d` feature matrix and labels in `0..K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DenseMatrix,
    labels: Vec<usize>,
    n_classes: usize,
}

impl Dataset {
    pub fn new(features: DenseMatrix, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= n_classes) {
            return Err(Error::Shape(format!("label {bad} outside 0..{n_classes}")));
        }
        if features.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::Shape("non-finite feature value".into()));
        }
        Ok(Self {
            features,
            labels,
            n_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    #[inline]
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let d = self.dim();
        let mut data = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            features: DenseMatrix::new(idx.len(), d, data).expect("rows copied from a valid matrix"),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
        }
    }

    /// First `n` examples (all of them if `n ≥ len`).
    pub fn head(&self, n: usize) -> Self {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }

    /// Splits into the first `n` examples and the rest.
    pub fn split_at(&self, n: usize) -> (Self, Self) {
        let n = n.min(self.len());
        let a: Vec<usize> = (0..n).collect();
        let b: Vec<usize> = (n..self.len()).collect();
        (self.subset(&a), self.subset(&b))
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &y in &self.labels {
            c[y] += 1;
        }
        c
    }
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::Format {
                path: path.to_path_buf(),
                msg: format!("bad gzip stream: {e}"),
            })?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            msg: "truncated IDX header".into(),
        })
}

/// Reads an IDX image/label pair (optionally gzip-compressed). Pixels are
/// scaled to `[0, 1]`; `limit` keeps the first examples in file order.
pub fn load_mnist(images: &Path, labels: &Path, limit: Option<usize>) -> Result<Dataset> {
    let fmt = |path: &Path, msg: String| Error::Format {
        path: path.to_path_buf(),
        msg,
    };
    let img = read_maybe_gz(images)?;
    let lab = read_maybe_gz(labels)?;
    let magic = be_u32(&img, 0, images)?;
    if magic != IMAGES_MAGIC {
        return Err(fmt(images, format!("bad image magic 0x{magic:08x}, expected 0x{IMAGES_MAGIC:08x}")));
    }
    let magic = be_u32(&lab, 0, labels)?;
    if magic != LABELS_MAGIC {
        return Err(fmt(labels, format!("bad label magic 0x{magic:08x}, expected 0x{LABELS_MAGIC:08x}")));
    }
    let n_img = be_u32(&img, 4, images)? as usize;
    let rows = be_u32(&img, 8, images)? as usize;
    let cols = be_u32(&img, 12, images)? as usize;
    let n_lab = be_u32(&lab, 4, labels)? as usize;
    if n_img != n_lab {
        return Err(fmt(images, format!("{n_img} images but {n_lab} labels in {}", labels.display())));
    }
    let d = rows * cols;
    if img.len() != 16 + n_img * d {
        return Err(fmt(images, format!("expected {} bytes, found {}", 16 + n_img * d, img.len())));
    }
    if lab.len() != 8 + n_lab {
        return Err(fmt(labels, format!("expected {} bytes, found {}", 8 + n_lab, lab.len())));
    }
    let n = limit.map_or(n_img, |l| l.min(n_img));
    let pixels: Vec<f64> = img[16..16 + n * d].iter().map(|&b| f64::from(b) / 255.0).collect();
    let ys: Vec<usize> = lab[8..8 + n].iter().map(|&b| usize::from(b)).collect();
    if let Some(bad) = ys.iter().find(|&&y| y > 9) {
        return Err(fmt(labels, format!("label {bad} outside 0..10")));
    }
    Dataset::new(DenseMatrix::new(n, d, pixels)?, ys, 10)
}

/// Writes an IDX pair (uncompressed). Used for fixtures and round trips.
pub fn write_idx(images: &Path, labels: &Path, pixels: &[u8], rows: usize, cols: usize, ys: &[u8]) -> Result<()> {
    if pixels.len() != ys.len() * rows * cols {
        return Err(Error::Shape("pixel buffer does not match label count".into()));
    }
    let n = ys.len() as u32;
    let mut img = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGES_MAGIC, n, rows as u32, cols as u32] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    img.extend_from_slice(pixels);
    let mut lab = Vec::with_capacity(8 + ys.len());
    lab.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&n.to_be_bytes());
    lab.extend_from_slice(ys);
    fs::write(images, img)?;
    fs::write(labels, lab)?;
    Ok(())
}

/// Isotropic unit-variance Gaussian clusters. With `dim ≥ K` the centers are
/// the centered simplex vertices `separation · (e_k − 1/K)`; otherwise they sit
/// on a circle (or a line for `dim = 1`) with the same spacing scale. Rows are
/// shuffled.
pub fn synth_blobs(classes: usize, per_class: usize, dim: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if classes < 2 {
        return Err(Error::Config("synthetic data needs at least 2 classes".into()));
    }
    if dim == 0 || per_class == 0 {
        return Err(Error::Config("synthetic data needs dim ≥ 1 and per_class ≥ 1".into()));
    }
    if !separation.is_finite() || separation < 0.0 {
        return Err(Error::Config(format!("invalid separation {separation}")));
    }
    let k = classes as f64;
    let center = |c: usize| -> Vec<f64> {
        let mut v = vec![0.0; dim];
        if dim >= classes {
            for (j, x) in v.iter_mut().enumerate().take(classes) {
                *x = separation * (f64::from(u8::from(j == c)) - 1.0 / k);
            }
        } else if dim == 1 {
            v[0] = separation * (c as f64 - (k - 1.0) / 2.0);
        } else {
            let r = separation * ((k - 1.0) / k).sqrt();
            let t = std::f64::consts::TAU * c as f64 / k;
            v[0] = r * t.cos();
            v[1] = r * t.sin();
        }
        v
    };
    let mut rng = Rng::new(seed);
    let n = classes * per_class;
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let centers: Vec<Vec<f64>> = (0..classes).map(center).collect();
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for &slot in &order {
        let c = slot / per_class;
        for &m in &centers[c] {
            data.push(m + rng.normal());
        }
        labels.push(c);
    }
    Dataset::new(DenseMatrix::new(n, dim, data)?, labels, classes)
}
