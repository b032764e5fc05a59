//! Shared test fixtures: a deterministic 28x28 ten-class image set written
//! through the IDX codec, standing in for a real digits corpus.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rat_core::data::{encode_idx_images, encode_idx_labels};

pub const SIDE: usize = 28;
pub const CLASSES: usize = 10;

pub struct DigitsFiles {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

/// Ten smooth blob prototypes; each sample is a prototype plus pixel noise,
/// quantized to bytes. Classes are separated by their bump layout by a
/// comfortable margin relative to the pixel noise.
pub fn write_synth_digits(dir: &Path, n_train: usize, n_test: usize, seed: u64) -> DigitsFiles {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut prototypes = Vec::with_capacity(CLASSES);
    for class in 0..CLASSES {
        let mut proto = vec![0.05f32; SIDE * SIDE];
        // Two anchor bumps on a class-specific grid cell keep every pair of
        // prototypes far apart; two free bumps add texture.
        let gx = (class % 3) as f64 * 7.0 + 7.0;
        let gy = (class / 3) as f64 * 6.0 + 5.0;
        let mut bumps = vec![(gx, gy, 3.5, 0.9), (27.0 - gx, 26.0 - gy, 3.0, 0.85)];
        for _ in 0..2 {
            bumps.push((
                rng.gen_range(5.0..23.0),
                rng.gen_range(5.0..23.0),
                rng.gen_range(2.5..4.5),
                rng.gen_range(0.55..0.9),
            ));
        }
        for (cx, cy, sigma, amp) in bumps {
            for y in 0..SIDE {
                for x in 0..SIDE {
                    let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                    proto[y * SIDE + x] += (amp * (-d2 / (2.0 * sigma * sigma)).exp()) as f32;
                }
            }
        }
        for v in &mut proto {
            *v = v.clamp(0.0, 0.92);
        }
        prototypes.push(proto);
    }

    let mut emit = |count: usize, rng: &mut ChaCha8Rng| -> (Vec<u8>, Vec<u8>) {
        let mut pixels = Vec::with_capacity(count * SIDE * SIDE);
        let mut labels = Vec::with_capacity(count);
        for i in 0..count {
            let class = i % CLASSES;
            labels.push(class as u8);
            for &p in &prototypes[class] {
                let noise = rng.gen_range(-0.13f32..0.13);
                let v = (p + noise).clamp(0.0, 1.0);
                pixels.push((v * 255.0).round() as u8);
            }
        }
        (pixels, labels)
    };

    let (train_pixels, train_labels) = emit(n_train, &mut rng);
    let (test_pixels, test_labels) = emit(n_test, &mut rng);

    let files = DigitsFiles {
        train_images: dir.join("train-images.idx"),
        train_labels: dir.join("train-labels.idx"),
        test_images: dir.join("test-images.idx"),
        test_labels: dir.join("test-labels.idx"),
    };
    std::fs::write(&files.train_images, encode_idx_images(SIDE, SIDE, &train_pixels)).unwrap();
    std::fs::write(&files.train_labels, encode_idx_labels(&train_labels)).unwrap();
    std::fs::write(&files.test_images, encode_idx_images(SIDE, SIDE, &test_pixels)).unwrap();
    std::fs::write(&files.test_labels, encode_idx_labels(&test_labels)).unwrap();
    files
}
