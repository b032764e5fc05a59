//! Forward pass. Dot products accumulate in f64 and are stored back as f32.
//!
//! Every output row is produced by [`affine_row`] regardless of batch size or
//! parallelism, so a sample's activations are bit-identical whether it is
//! evaluated alone, inside a batch, or on the sequential path.

use crate::error::{Error, Result};
use crate::parallel::for_each_row;
use crate::tensor::Tensor;

use super::model::{Activation, MlpModel};

/// One output row of `act(W x + b)` written into `out`.
///
/// The dot product runs four independent f64 partial sums folded in a fixed
/// order, so results are deterministic while the adds still pipeline.
#[inline]
pub(crate) fn affine_row(x: &[f32], weights: &[f32], bias: &[f32], out: &mut [f32]) {
    let in_dim = x.len();
    for (o, out_v) in out.iter_mut().enumerate() {
        let w = &weights[o * in_dim..(o + 1) * in_dim];
        let mut lanes = [0.0f64; 4];
        let chunks = in_dim / 4;
        for c in 0..chunks {
            let i = c * 4;
            lanes[0] += x[i] as f64 * w[i] as f64;
            lanes[1] += x[i + 1] as f64 * w[i + 1] as f64;
            lanes[2] += x[i + 2] as f64 * w[i + 2] as f64;
            lanes[3] += x[i + 3] as f64 * w[i + 3] as f64;
        }
        let mut acc = bias[o] as f64 + ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3]));
        for i in chunks * 4..in_dim {
            acc += x[i] as f64 * w[i] as f64;
        }
        *out_v = acc as f32;
    }
}

fn check_batch(model: &MlpModel, batch: &Tensor) -> Result<()> {
    if batch.shape().len() != 2 {
        return Err(Error::ShapeMismatch {
            expected: vec![0, model.input_dim()],
            got: batch.shape().to_vec(),
            context: "forward expects a [n, d] batch".into(),
        });
    }
    if batch.cols() != model.input_dim() {
        return Err(Error::LayerDimension {
            layer: 0,
            expected: model.input_dim(),
            got: batch.cols(),
        });
    }
    Ok(())
}

/// Activations and pre-activations of one batch, kept for backprop.
pub(crate) struct ForwardCache {
    /// `acts[0]` is the input; `acts[l + 1] = act(pres[l])`; last entry is the logits.
    pub acts: Vec<Tensor>,
    /// Pre-activations per layer.
    pub pres: Vec<Tensor>,
}

pub(crate) fn forward_cached(model: &MlpModel, batch: &Tensor, par: bool) -> Result<ForwardCache> {
    check_batch(model, batch)?;
    model.validate()?;
    let n = batch.rows();
    let mut acts = Vec::with_capacity(model.layers.len() + 1);
    let mut pres = Vec::with_capacity(model.layers.len());
    acts.push(batch.clone());
    for layer in &model.layers {
        let input = acts.last().expect("nonempty");
        let mut pre = Tensor::zeros(vec![n, layer.out_dim()]);
        {
            let w = layer.weights.data();
            let b = layer.bias.data();
            let cols = layer.out_dim();
            let in_data = input.data();
            let in_dim = layer.in_dim();
            for_each_row(pre.data_mut(), cols, par, |r, row| {
                affine_row(&in_data[r * in_dim..(r + 1) * in_dim], w, b, row);
            });
        }
        let mut act = pre.clone();
        match layer.activation {
            Activation::Identity => {}
            Activation::Relu => {
                for v in act.data_mut() {
                    *v = Activation::Relu.apply(*v);
                }
            }
        }
        pres.push(pre);
        acts.push(act);
    }
    Ok(ForwardCache { acts, pres })
}

/// Logits `[n, c]` for a batch `[n, d]`.
pub fn forward(model: &MlpModel, batch: &Tensor) -> Result<Tensor> {
    let cache = forward_cached(model, batch, true)?;
    Ok(cache.acts.into_iter().last().expect("nonempty"))
}

/// Sequential twin of [`forward`]; bit-identical output.
pub fn forward_seq(model: &MlpModel, batch: &Tensor) -> Result<Tensor> {
    let cache = forward_cached(model, batch, false)?;
    Ok(cache.acts.into_iter().last().expect("nonempty"))
}

/// Logits for a single sample. Shares [`affine_row`] with the batch path.
pub(crate) fn forward_single(model: &MlpModel, x: &[f32]) -> Vec<f32> {
    debug_assert_eq!(x.len(), model.input_dim());
    let mut cur = x.to_vec();
    for layer in &model.layers {
        let mut next = vec![0.0f32; layer.out_dim()];
        affine_row(&cur, layer.weights.data(), layer.bias.data(), &mut next);
        if layer.activation == Activation::Relu {
            for v in &mut next {
                *v = Activation::Relu.apply(*v);
            }
        }
        cur = next;
    }
    cur
}

/// Single-sample forward that also keeps pre-activations for input backprop.
pub(crate) fn forward_single_cached(model: &MlpModel, x: &[f32]) -> (Vec<Vec<f32>>, Vec<f32>) {
    let mut pres = Vec::with_capacity(model.layers.len());
    let mut cur = x.to_vec();
    for layer in &model.layers {
        let mut pre = vec![0.0f32; layer.out_dim()];
        affine_row(&cur, layer.weights.data(), layer.bias.data(), &mut pre);
        cur = pre.clone();
        if layer.activation == Activation::Relu {
            for v in &mut cur {
                *v = Activation::Relu.apply(*v);
            }
        }
        pres.push(pre);
    }
    (pres, cur)
}
