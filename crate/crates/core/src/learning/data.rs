//! Datasets for the training harness: IDX-format image/label files (the
//! MNIST container format), a synthetic Gaussian-blob generator for fast
//! runs, and IID client partitioning.

use std::fs;
use std::path::Path;

use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Labeled feature vectors with uniform dimension. Features are stored
/// flat, row-major.
#[derive(Clone, Debug)]
pub struct Dataset {
    features: Vec<f32>,
    labels: Vec<u8>,
    dim: usize,
    classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<f32>, labels: Vec<u8>, dim: usize, classes: usize) -> Result<Dataset> {
        if dim == 0 || !(2..=256).contains(&classes) {
            return Err(Error::Config(format!(
                "dataset needs dim > 0 and 2..=256 classes, got {dim}/{classes}"
            )));
        }
        if labels.len() * dim != features.len() {
            return Err(Error::Config(format!(
                "feature buffer holds {} values, but {} samples of dim {dim} need {}",
                features.len(),
                labels.len(),
                labels.len() * dim
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l as usize >= classes) {
            return Err(Error::Config(format!(
                "label {l} out of range for {classes} classes"
            )));
        }
        Ok(Dataset {
            features,
            labels,
            dim,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn sample(&self, idx: usize) -> (&[f32], usize) {
        (
            &self.features[idx * self.dim..(idx + 1) * self.dim],
            self.labels[idx] as usize,
        )
    }

    /// Copy of this dataset with every label mirrored (`l -> L - l - 1`).
    pub fn with_flipped_labels(&self) -> Dataset {
        Dataset {
            features: self.features.clone(),
            labels: self
                .labels
                .iter()
                .map(|&l| (self.classes - 1 - l as usize) as u8)
                .collect(),
            dim: self.dim,
            classes: self.classes,
        }
    }

    /// The first `count` samples of a seeded shuffle.
    pub fn subsample(&self, count: usize, seed: u64) -> Dataset {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
        idx.truncate(count.min(self.len()));
        self.take(&idx)
    }

    /// New dataset holding the rows at `idx`, in that order. Panics on an
    /// out-of-range index.
    pub fn take(&self, idx: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(idx.len() * self.dim);
        let mut labels = Vec::with_capacity(idx.len());
        for &i in idx {
            features.extend_from_slice(&self.features[i * self.dim..(i + 1) * self.dim]);
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            labels,
            dim: self.dim,
            classes: self.classes,
        }
    }

    #[cfg(test)]
    pub fn force_label(&mut self, idx: usize, label: u8) {
        self.labels[idx] = label;
    }
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::Parse(format!(
            "file truncated at offset {offset}: needed 4 header bytes, have {}",
            bytes.len().saturating_sub(offset)
        )));
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

/// Parse an IDX image file (big-endian magic 0x00000803, then count, rows,
/// cols, then one unsigned byte per pixel). Pixels are scaled to [0, 1].
pub fn load_idx_images(path: &Path) -> Result<(Vec<f32>, usize, usize)> {
    let bytes = fs::read(path)?;
    parse_idx_images(&bytes)
}

pub(crate) fn parse_idx_images(bytes: &[u8]) -> Result<(Vec<f32>, usize, usize)> {
    let magic = be_u32(bytes, 0)?;
    if magic != 0x0000_0803 {
        return Err(Error::Parse(format!(
            "bad image magic {magic:#010x} at offset 0, want 0x00000803"
        )));
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let need = 16 + count * rows * cols;
    if bytes.len() < need {
        return Err(Error::Parse(format!(
            "image data truncated at offset {}: header promises {need} bytes",
            bytes.len()
        )));
    }
    let features = bytes[16..need].iter().map(|&b| b as f32 / 255.0).collect();
    Ok((features, count, rows * cols))
}

/// Parse an IDX label file (big-endian magic 0x00000801, then count, then
/// one byte per label).
pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = fs::read(path)?;
    parse_idx_labels(&bytes)
}

pub(crate) fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != 0x0000_0801 {
        return Err(Error::Parse(format!(
            "bad label magic {magic:#010x} at offset 0, want 0x00000801"
        )));
    }
    let count = be_u32(bytes, 4)? as usize;
    let need = 8 + count;
    if bytes.len() < need {
        return Err(Error::Parse(format!(
            "label data truncated at offset {}: header promises {need} bytes",
            bytes.len()
        )));
    }
    Ok(bytes[8..need].to_vec())
}

/// Load the four-file MNIST layout from `dir`:
/// `train-images-idx3-ubyte`, `train-labels-idx1-ubyte`,
/// `t10k-images-idx3-ubyte`, `t10k-labels-idx1-ubyte`.
pub fn load_mnist(dir: &Path) -> Result<(Dataset, Dataset)> {
    let one = |img: &str, lab: &str| -> Result<Dataset> {
        let (features, count, dim) = load_idx_images(&dir.join(img))?;
        let labels = load_idx_labels(&dir.join(lab))?;
        if labels.len() != count {
            return Err(Error::Parse(format!(
                "{img} holds {count} images but {lab} holds {} labels",
                labels.len()
            )));
        }
        Dataset::new(features, labels, dim, 10)
    };
    Ok((
        one("train-images-idx3-ubyte", "train-labels-idx1-ubyte")?,
        one("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")?,
    ))
}

/// Whether `dir` holds the four MNIST files.
pub fn mnist_available(dir: &Path) -> bool {
    [
        "train-images-idx3-ubyte",
        "train-labels-idx1-ubyte",
        "t10k-images-idx3-ubyte",
        "t10k-labels-idx1-ubyte",
    ]
    .iter()
    .all(|f| dir.join(f).is_file())
}

/// Synthetic Gaussian blobs: one cluster center per class, labels assigned
/// round-robin so class counts stay balanced. Deterministic under `seed`.
pub fn synth_blobs(samples: usize, dim: usize, classes: usize, seed: u64) -> Result<Dataset> {
    if samples == 0 {
        return Err(Error::Config("synthetic dataset needs samples > 0".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let center_dist = Normal::new(0.0, 0.5).expect("finite std");
    let noise = Normal::new(0.0, 0.125).expect("finite std");
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..dim).map(|_| center_dist.sample(&mut rng)).collect())
        .collect();
    let mut features = Vec::with_capacity(samples * dim);
    let mut labels = Vec::with_capacity(samples);
    for i in 0..samples {
        let c = i % classes;
        labels.push(c as u8);
        for &center in &centers[c] {
            features.push((center + noise.sample(&mut rng)) as f32);
        }
    }
    Dataset::new(features, labels, dim, classes)
}

/// Split `data` into `n` disjoint shards whose sizes differ by at most
/// one, over a seeded shuffle.
pub fn iid_partition(data: &Dataset, n: usize, seed: u64) -> Result<Vec<Dataset>> {
    if n == 0 {
        return Err(Error::Config("partition needs at least one shard".into()));
    }
    if data.len() < n {
        return Err(Error::Config(format!(
            "cannot split {} samples across {n} clients",
            data.len()
        )));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
    let base = data.len() / n;
    let extra = data.len() % n;
    let mut shards = Vec::with_capacity(n);
    let mut start = 0;
    for i in 0..n {
        let size = base + usize::from(i < extra);
        shards.push(data.take(&idx[start..start + size]));
        start += size;
    }
    Ok(shards)
}

/// A seeded RNG for one client's local training in one round, independent
/// of every other client's stream.
pub fn client_rng(seed: u64, round: u64, client: u64) -> ChaCha20Rng {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&round.to_le_bytes());
    bytes[16..24].copy_from_slice(&client.to_le_bytes());
    bytes[24..].copy_from_slice(b"trnshuf!");
    ChaCha20Rng::from_seed(bytes)
}
