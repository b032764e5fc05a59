//! Datasets: IDX-format image ingestion, synthetic 2-D sets, seeded batching.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::path::Path;

use crate::error::{Error, Result};
use crate::seeding::derive_seed;
use crate::tensor::Tensor;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// An immutable labelled dataset with inputs in the unit box.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub inputs: Tensor,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub name: String,
}

impl Dataset {
    pub fn new(inputs: Tensor, labels: Vec<usize>, num_classes: usize, name: String) -> Result<Self> {
        if inputs.shape().len() != 2 {
            return Err(Error::ShapeMismatch {
                expected: vec![labels.len(), 0],
                got: inputs.shape().to_vec(),
                context: "dataset inputs must be [n, d]".into(),
            });
        }
        if inputs.rows() != labels.len() {
            return Err(Error::ShapeMismatch {
                expected: vec![inputs.rows()],
                got: vec![labels.len()],
                context: "dataset labels".into(),
            });
        }
        if num_classes < 2 {
            return Err(Error::InvalidConfig(format!(
                "dataset needs >= 2 classes, got {num_classes}"
            )));
        }
        if inputs.data().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidConfig(format!(
                "dataset '{name}' has coordinates outside [0, 1]"
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::InvalidConfig(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Self {
            inputs,
            labels,
            num_classes,
            name,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    /// Input row `i` as an owned 1-D tensor.
    pub fn sample(&self, i: usize) -> (Tensor, usize) {
        (Tensor::from_vec(self.inputs.row(i).to_vec()), self.labels[i])
    }

    /// The first `limit` samples (all of them if `limit` is larger).
    pub fn truncated(&self, limit: usize) -> Result<Dataset> {
        let n = limit.min(self.len());
        let d = self.input_dim();
        let inputs = Tensor::matrix(n, d, self.inputs.data()[..n * d].to_vec())?;
        Dataset::new(
            inputs,
            self.labels[..n].to_vec(),
            self.num_classes,
            self.name.clone(),
        )
    }
}

fn read_be_u32(bytes: &[u8], offset: usize, path: &str) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::IdxTruncated {
            path: path.into(),
            needed: end,
            have: bytes.len(),
        });
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

/// Parses an IDX image file: magic, N, H, W (all big-endian u32), raw bytes.
fn parse_idx_images<'a>(bytes: &'a [u8], path: &str) -> Result<(usize, usize, usize, &'a [u8])> {
    let magic = read_be_u32(bytes, 0, path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::IdxBadMagic {
            path: path.into(),
            expected: IDX_IMAGES_MAGIC,
            found: magic,
        });
    }
    let n = read_be_u32(bytes, 4, path)? as usize;
    let h = read_be_u32(bytes, 8, path)? as usize;
    let w = read_be_u32(bytes, 12, path)? as usize;
    let needed = 16 + n * h * w;
    if bytes.len() < needed {
        return Err(Error::IdxTruncated {
            path: path.into(),
            needed,
            have: bytes.len(),
        });
    }
    Ok((n, h, w, &bytes[16..needed]))
}

fn parse_idx_labels<'a>(bytes: &'a [u8], path: &str) -> Result<&'a [u8]> {
    let magic = read_be_u32(bytes, 0, path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::IdxBadMagic {
            path: path.into(),
            expected: IDX_LABELS_MAGIC,
            found: magic,
        });
    }
    let n = read_be_u32(bytes, 4, path)? as usize;
    let needed = 8 + n;
    if bytes.len() < needed {
        return Err(Error::IdxTruncated {
            path: path.into(),
            needed,
            have: bytes.len(),
        });
    }
    Ok(&bytes[8..needed])
}

/// Loads an IDX image/label pair; pixels are scaled by 1/255 into [0, 1] and
/// flattened row-major to `d = H * W`.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let image_bytes = std::fs::read(images_path)?;
    let label_bytes = std::fs::read(labels_path)?;
    let (n, h, w, pixels) = parse_idx_images(&image_bytes, &images_path.to_string_lossy())?;
    let raw_labels = parse_idx_labels(&label_bytes, &labels_path.to_string_lossy())?;
    if raw_labels.len() != n {
        return Err(Error::IdxCountMismatch {
            images: n,
            labels: raw_labels.len(),
        });
    }
    let inputs: Vec<f32> = pixels.iter().map(|&b| b as f32 / 255.0).collect();
    let labels: Vec<usize> = raw_labels.iter().map(|&b| b as usize).collect();
    let num_classes = labels.iter().copied().max().unwrap_or(0).max(1) + 1;
    let name = images_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "idx".into());
    Dataset::new(Tensor::matrix(n, h * w, inputs)?, labels, num_classes, name)
}

/// Encodes images (each `h * w` bytes, concatenated) as an IDX image file.
pub fn encode_idx_images(h: usize, w: usize, pixels: &[u8]) -> Vec<u8> {
    assert!(h * w > 0 && pixels.len() % (h * w) == 0);
    let n = pixels.len() / (h * w);
    let mut out = Vec::with_capacity(16 + pixels.len());
    out.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&(n as u32).to_be_bytes());
    out.extend_from_slice(&(h as u32).to_be_bytes());
    out.extend_from_slice(&(w as u32).to_be_bytes());
    out.extend_from_slice(pixels);
    out
}

/// Encodes labels as an IDX label file.
pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Kind of generated 2-D set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    TwoMoons,
    GaussianBlobs,
}

/// Parameters of a generated dataset.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n_samples: usize,
    /// Standard deviation of the coordinate noise, applied before rescaling.
    pub noise_std: f64,
    /// Number of classes; used by blobs only, moons are always binary.
    pub n_classes: usize,
    pub seed: u64,
}

/// Affine per-axis rescale of 2-D points into [0.05, 0.95]^2 so that attack
/// balls rarely saturate at the domain boundary.
fn rescale_into_margin_box(points: &mut [(f64, f64)]) {
    for axis in 0..2 {
        let get = |p: &(f64, f64)| if axis == 0 { p.0 } else { p.1 };
        let min = points.iter().map(&get).fold(f64::INFINITY, f64::min);
        let max = points.iter().map(&get).fold(f64::NEG_INFINITY, f64::max);
        let span = max - min;
        for p in points.iter_mut() {
            let v = if axis == 0 { &mut p.0 } else { &mut p.1 };
            *v = if span > 1e-12 {
                0.05 + 0.9 * (*v - min) / span
            } else {
                0.5
            };
        }
    }
}

/// Deterministic synthetic 2-D classification set.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.n_samples == 0 {
        return Err(Error::InvalidConfig("n_samples must be > 0".into()));
    }
    if spec.noise_std < 0.0 {
        return Err(Error::InvalidConfig("noise_std must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_std.max(f64::MIN_POSITIVE)).expect("valid normal");
    let draw_noise = |rng: &mut ChaCha8Rng| {
        if spec.noise_std > 0.0 {
            noise.sample(rng)
        } else {
            0.0
        }
    };

    let (mut points, labels, num_classes, name) = match spec.kind {
        SyntheticKind::TwoMoons => {
            let n0 = spec.n_samples - spec.n_samples / 2;
            let n1 = spec.n_samples / 2;
            let mut points = Vec::with_capacity(spec.n_samples);
            let mut labels = Vec::with_capacity(spec.n_samples);
            let arc = |j: usize, count: usize| {
                if count <= 1 {
                    0.0
                } else {
                    std::f64::consts::PI * j as f64 / (count - 1) as f64
                }
            };
            for j in 0..n0 {
                let t = arc(j, n0);
                points.push((t.cos() + draw_noise(&mut rng), t.sin() + draw_noise(&mut rng)));
                labels.push(0usize);
            }
            for j in 0..n1 {
                let t = arc(j, n1);
                points.push((
                    1.0 - t.cos() + draw_noise(&mut rng),
                    0.5 - t.sin() + draw_noise(&mut rng),
                ));
                labels.push(1usize);
            }
            (points, labels, 2, "two_moons")
        }
        SyntheticKind::GaussianBlobs => {
            let k = spec.n_classes;
            if k < 2 {
                return Err(Error::InvalidConfig(format!(
                    "blobs need >= 2 classes, got {k}"
                )));
            }
            let centers: Vec<(f64, f64)> = (0..k)
                .map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)))
                .collect();
            let mut points = Vec::with_capacity(spec.n_samples);
            let mut labels = Vec::with_capacity(spec.n_samples);
            for i in 0..spec.n_samples {
                let y = i % k;
                points.push((
                    centers[y].0 + draw_noise(&mut rng),
                    centers[y].1 + draw_noise(&mut rng),
                ));
                labels.push(y);
            }
            (points, labels, k, "gaussian_blobs")
        }
    };

    rescale_into_margin_box(&mut points);
    let mut data = Vec::with_capacity(points.len() * 2);
    for (x, y) in &points {
        data.push(*x as f32);
        data.push(*y as f32);
    }
    Dataset::new(
        Tensor::matrix(points.len(), 2, data)?,
        labels,
        num_classes,
        name.into(),
    )
}

/// One shuffled mini-batch.
#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: Tensor,
    pub labels: Vec<usize>,
}

/// Iterator over one epoch of shuffled batches.
pub struct Batches<'a> {
    dataset: &'a Dataset,
    order: Vec<usize>,
    batch_size: usize,
    cursor: usize,
}

impl<'a> Iterator for Batches<'a> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.cursor >= self.order.len() {
            return None;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let idx = &self.order[self.cursor..end];
        self.cursor = end;
        let d = self.dataset.input_dim();
        let mut data = Vec::with_capacity(idx.len() * d);
        let mut labels = Vec::with_capacity(idx.len());
        for &i in idx {
            data.extend_from_slice(self.dataset.inputs.row(i));
            labels.push(self.dataset.labels[i]);
        }
        Some(Batch {
            inputs: Tensor::matrix(idx.len(), d, data).expect("consistent shape"),
            labels,
        })
    }
}

/// Epoch-seeded shuffled batches; every sample appears exactly once per epoch
/// and the final partial batch is kept.
pub fn batches(dataset: &Dataset, batch_size: usize, seed: u64, epoch: u64) -> Result<Batches<'_>> {
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
    }
    if dataset.is_empty() {
        return Err(Error::EmptyDataset(dataset.name.clone()));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[epoch]));
    order.shuffle(&mut rng);
    Ok(Batches {
        dataset,
        order,
        batch_size,
        cursor: 0,
    })
}
