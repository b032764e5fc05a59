//! Slow, straight-line reference implementations used to cross-check the
//! engine. Everything here is plain nested loops in f64 and shares no code
//! with the fast paths.

use crate::engine::{Activation, MlpModel};

/// Logits of one sample, computed with nested loops in f64.
pub fn forward_f64(model: &MlpModel, x: &[f32]) -> Vec<f64> {
    let mut cur: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    for layer in &model.layers {
        let in_dim = layer.in_dim();
        let out_dim = layer.out_dim();
        let w = layer.weights.data();
        let b = layer.bias.data();
        let mut next = vec![0.0f64; out_dim];
        for o in 0..out_dim {
            let mut acc = b[o] as f64;
            for i in 0..in_dim {
                acc += w[o * in_dim + i] as f64 * cur[i];
            }
            next[o] = match layer.activation {
                Activation::Relu => acc.max(0.0),
                Activation::Identity => acc,
            };
        }
        cur = next;
    }
    cur
}

/// Unfused softmax followed by a dot product with the soft target.
pub fn cross_entropy_f64(logits: &[f64], target: &[f32]) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let mut loss = 0.0f64;
    for (k, &t) in target.iter().enumerate() {
        if t != 0.0 {
            loss -= t as f64 * (exps[k] / sum).ln();
        }
    }
    loss
}

/// Mean reference loss of a batch stored row-major in `inputs`.
pub fn batch_loss_f64(model: &MlpModel, inputs: &[f32], targets: &[f32], n: usize) -> f64 {
    let d = model.input_dim();
    let c = model.num_classes;
    let mut total = 0.0f64;
    for r in 0..n {
        let logits = forward_f64(model, &inputs[r * d..(r + 1) * d]);
        total += cross_entropy_f64(&logits, &targets[r * c..(r + 1) * c]);
    }
    total / n as f64
}

/// Untargeted margin `max_{i != y} z_i - z_y` on the reference logits.
pub fn margin_f64(model: &MlpModel, x: &[f32], label: usize) -> f64 {
    let logits = forward_f64(model, x);
    let best_other = logits
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label)
        .map(|(_, &z)| z)
        .fold(f64::NEG_INFINITY, f64::max);
    best_other - logits[label]
}

/// Central finite differences of `f` along coordinate `idx` of `values`.
pub fn central_difference<F: FnMut(&[f32]) -> f64>(
    values: &[f32],
    idx: usize,
    h: f64,
    mut f: F,
) -> f64 {
    let mut plus = values.to_vec();
    plus[idx] = (plus[idx] as f64 + h) as f32;
    let mut minus = values.to_vec();
    minus[idx] = (minus[idx] as f64 - h) as f32;
    (f(&plus) - f(&minus)) / (2.0 * h)
}

/// Smallest absolute pre-activation across all layers for one sample.
///
/// Finite differences are only a valid derivative oracle while every
/// perturbed evaluation stays on the same linear piece of each ReLU; callers
/// use this to rejection-sample test cases away from the kinks.
pub fn min_preactivation_magnitude(model: &MlpModel, x: &[f32]) -> f64 {
    let mut cur: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    let mut min_abs = f64::INFINITY;
    for layer in &model.layers {
        let in_dim = layer.in_dim();
        let w = layer.weights.data();
        let b = layer.bias.data();
        let mut next = vec![0.0f64; layer.out_dim()];
        for (o, slot) in next.iter_mut().enumerate() {
            let mut acc = b[o] as f64;
            for i in 0..in_dim {
                acc += w[o * in_dim + i] as f64 * cur[i];
            }
            if layer.activation == Activation::Relu {
                min_abs = min_abs.min(acc.abs());
                *slot = acc.max(0.0);
            } else {
                *slot = acc;
            }
        }
        cur = next;
    }
    min_abs
}
