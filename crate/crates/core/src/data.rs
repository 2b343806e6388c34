//! IDX ingestion and label overlay.
//!
//! IDX files are big-endian: a magic number (`0x00000803` for `u8` images with
//! three dimensions, `0x00000801` for `u8` labels with one), the dimension
//! sizes as `u32`, then the raw bytes. Pixels are scaled by `1/255`.

use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Real, SeededRng};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
/// Classes in the MNIST family.
pub const NUM_CLASSES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    images: Matrix<f32>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabeledDataset {
    pub fn new(images: Matrix<f32>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if images.rows() != labels.len() {
            return Err(Error::Dimension {
                op: "LabeledDataset",
                left: images.shape(),
                right: (labels.len(), 1),
            });
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= num_classes) {
            return Err(Error::domain(
                "label",
                format!("sample {i} has label {y} >= {num_classes} classes"),
            ));
        }
        if images.as_slice().iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::domain("LabeledDataset", "pixel outside [0, 1]"));
        }
        Ok(Self {
            images,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn images(&self) -> &Matrix<f32> {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input_width(&self) -> usize {
        self.images.cols()
    }

    /// The first `n` samples (all of them if `n` exceeds the length).
    pub fn take(&self, n: usize) -> Self {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&idx).expect("indices in range")
    }

    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let images = self.images.select_rows(indices)?;
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Ok(Self {
            images,
            labels,
            num_classes: self.num_classes,
        })
    }
}

fn format_err(file: &str, field: &'static str, detail: impl Into<String>) -> Error {
    Error::Format {
        file: file.to_string(),
        field,
        detail: detail.into(),
    }
}

fn read_u32(bytes: &[u8], offset: usize, file: &str, field: &'static str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| format_err(file, field, "file truncated inside the header"))
}

/// Parses an IDX image file into `(count, rows·cols)` pixels in `[0, 1]`.
pub fn parse_idx_images(bytes: &[u8], file: &str) -> Result<Matrix<f32>> {
    let magic = read_u32(bytes, 0, file, "magic")?;
    if magic != IMAGE_MAGIC {
        return Err(format_err(
            file,
            "magic",
            format!("expected {IMAGE_MAGIC:#010x} for images, found {magic:#010x}"),
        ));
    }
    let count = read_u32(bytes, 4, file, "image count")? as usize;
    let rows = read_u32(bytes, 8, file, "row count")? as usize;
    let cols = read_u32(bytes, 12, file, "column count")? as usize;
    let width = rows * cols;
    let body = &bytes[16..];
    if body.len() != count * width {
        return Err(format_err(
            file,
            "pixel data",
            format!(
                "expected {} bytes for {count}x{rows}x{cols}, found {}",
                count * width,
                body.len()
            ),
        ));
    }
    let data = body.iter().map(|&b| b as f32 / 255.0).collect();
    Matrix::from_vec(count, width, data)
}

pub fn parse_idx_labels(bytes: &[u8], file: &str) -> Result<Vec<usize>> {
    let magic = read_u32(bytes, 0, file, "magic")?;
    if magic != LABEL_MAGIC {
        return Err(format_err(
            file,
            "magic",
            format!("expected {LABEL_MAGIC:#010x} for labels, found {magic:#010x}"),
        ));
    }
    let count = read_u32(bytes, 4, file, "label count")? as usize;
    let body = &bytes[8..];
    if body.len() != count {
        return Err(format_err(
            file,
            "label data",
            format!("expected {count} bytes, found {}", body.len()),
        ));
    }
    Ok(body.iter().map(|&b| b as usize).collect())
}

pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let images = parse_idx_images(&std::fs::read(ip)?, &ip.display().to_string())?;
    let labels = parse_idx_labels(&std::fs::read(lp)?, &lp.display().to_string())?;
    if images.rows() != labels.len() {
        return Err(format_err(
            &lp.display().to_string(),
            "label count",
            format!(
                "{} labels for {} images in {}",
                labels.len(),
                images.rows(),
                ip.display()
            ),
        ));
    }
    LabeledDataset::new(images, labels, NUM_CLASSES)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn prefix(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "t10k",
        }
    }
}

/// Loads `{train,t10k}-{images-idx3,labels-idx1}-ubyte` from a directory.
pub fn load_split(dir: impl AsRef<Path>, split: Split) -> Result<LabeledDataset> {
    let dir = dir.as_ref();
    let p = split.prefix();
    load_idx(
        dir.join(format!("{p}-images-idx3-ubyte")),
        dir.join(format!("{p}-labels-idx1-ubyte")),
    )
}

/// Writes a one-hot code of `labels[i]` over the first `num_classes` inputs of
/// row `i`. Other positions are copied unchanged.
pub fn overlay_labels<T: Real>(images: &Matrix<T>, labels: &[usize], num_classes: usize) -> Matrix<T> {
    assert_eq!(images.rows(), labels.len(), "one label per row");
    assert!(num_classes <= images.cols(), "overlay wider than the input");
    let mut out = images.clone();
    for (r, &y) in labels.iter().enumerate() {
        let row = out.row_mut(r);
        row[..num_classes].fill(T::zero());
        row[y] = T::one();
    }
    out
}

/// Overlays every row with a single class.
pub fn overlay_class<T: Real>(images: &Matrix<T>, class: usize, num_classes: usize) -> Matrix<T> {
    overlay_labels(images, &vec![class; images.rows()], num_classes)
}

pub fn make_positive(batch: &LabeledDataset) -> Matrix<f32> {
    overlay_labels(batch.images(), batch.labels(), batch.num_classes())
}

/// Draws, per sample, a label uniformly from the classes other than its own.
pub fn wrong_labels(labels: &[usize], num_classes: usize, rng: &mut SeededRng) -> Result<Vec<usize>> {
    if num_classes < 2 {
        return Err(Error::domain(
            "negative labels",
            format!("need at least 2 classes, have {num_classes}"),
        ));
    }
    Ok(labels
        .iter()
        .map(|&y| {
            let k = rng.random_range(0..num_classes - 1);
            if k >= y {
                k + 1
            } else {
                k
            }
        })
        .collect())
}

/// Candidate negatives: each image overlaid with a wrong label. Returns the
/// overlaid inputs and the labels used.
pub fn make_negative_candidates(
    batch: &LabeledDataset,
    rng: &mut SeededRng,
) -> Result<(Matrix<f32>, Vec<usize>)> {
    let labels = wrong_labels(batch.labels(), batch.num_classes(), rng)?;
    Ok((
        overlay_labels(batch.images(), &labels, batch.num_classes()),
        labels,
    ))
}
