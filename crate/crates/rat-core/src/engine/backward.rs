//! Reverse-mode gradients for the mean soft cross-entropy loss.
//!
//! The upstream logit gradient `softmax(z) - t` is kept unscaled through the
//! layer chain; the mean's `1/n` factor is applied once when a gradient is
//! stored. Accumulations run in f64, each output element is reduced by a
//! single task in index order, so results do not depend on thread count and
//! duplicating every batch row leaves parameter gradients unchanged.

use crate::error::{Error, Result};
use crate::parallel::for_each_row;
use crate::tensor::Tensor;

use super::forward::forward_cached;
use super::loss::{row_cross_entropy, softmax_row, validate_targets};
use super::model::{Activation, MlpModel};

/// Parameter gradients of one layer, shapes mirroring the layer.
#[derive(Debug, Clone)]
pub struct LayerGradients {
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Gradients of the mean loss for every parameter and every input coordinate.
#[derive(Debug, Clone)]
pub struct GradientBundle {
    pub layers: Vec<LayerGradients>,
    pub input: Tensor,
    pub loss: f64,
}

impl GradientBundle {
    /// Checks the mirror-shape invariant against `model`.
    pub fn shapes_mirror(&self, model: &MlpModel) -> bool {
        self.layers.len() == model.layers.len()
            && self.layers.iter().zip(&model.layers).all(|(g, l)| {
                g.weights.shape() == l.weights.shape() && g.bias.shape() == l.bias.shape()
            })
    }
}

/// Analytic gradients of the mean soft cross-entropy over `batch`.
pub fn backward(model: &MlpModel, batch: &Tensor, targets: &Tensor) -> Result<GradientBundle> {
    backward_impl(model, batch, targets, true)
}

/// Sequential twin of [`backward`]; bit-identical output.
pub fn backward_seq(model: &MlpModel, batch: &Tensor, targets: &Tensor) -> Result<GradientBundle> {
    backward_impl(model, batch, targets, false)
}

fn backward_impl(
    model: &MlpModel,
    batch: &Tensor,
    targets: &Tensor,
    par: bool,
) -> Result<GradientBundle> {
    let cache = forward_cached(model, batch, par)?;
    let logits = cache.acts.last().expect("nonempty");
    if targets.shape() != logits.shape() {
        return Err(Error::ShapeMismatch {
            expected: logits.shape().to_vec(),
            got: targets.shape().to_vec(),
            context: "backward targets".into(),
        });
    }
    validate_targets(targets)?;

    let n = batch.rows();
    let inv_n = 1.0 / n as f64;

    let mut loss = 0.0f64;
    for r in 0..n {
        loss += row_cross_entropy(logits.row(r), targets.row(r));
    }
    loss *= inv_n;

    // Unscaled upstream gradient at the logits: softmax(z) - t.
    let c = model.num_classes;
    let mut delta = Tensor::zeros(vec![n, c]);
    for r in 0..n {
        let probs = softmax_row(logits.row(r));
        let t = targets.row(r);
        let out = delta.row_mut(r);
        for k in 0..c {
            out[k] = (probs[k] - t[k] as f64) as f32;
        }
    }

    let num_layers = model.layers.len();
    let mut layer_grads: Vec<Option<LayerGradients>> = (0..num_layers).map(|_| None).collect();
    let mut input_grad: Option<Tensor> = None;

    for l in (0..num_layers).rev() {
        let layer = &model.layers[l];
        let prev_act = &cache.acts[l];
        let in_dim = layer.in_dim();
        let out_dim = layer.out_dim();

        // dW[o][i] = 1/n * sum_r delta[r][o] * prev_act[r][i]
        let mut dw = Tensor::zeros(vec![out_dim, in_dim]);
        {
            let delta_data = delta.data();
            let act_data = prev_act.data();
            for_each_row(dw.data_mut(), in_dim, par, |o, row| {
                let mut acc = vec![0.0f64; in_dim];
                for r in 0..n {
                    let d = delta_data[r * out_dim + o] as f64;
                    if d != 0.0 {
                        let a = &act_data[r * in_dim..(r + 1) * in_dim];
                        for i in 0..in_dim {
                            acc[i] += d * a[i] as f64;
                        }
                    }
                }
                for i in 0..in_dim {
                    row[i] = (acc[i] * inv_n) as f32;
                }
            });
        }

        // db[o] = 1/n * sum_r delta[r][o]
        let mut db = Tensor::zeros(vec![out_dim]);
        {
            let delta_data = delta.data();
            let db_data = db.data_mut();
            for (o, out) in db_data.iter_mut().enumerate() {
                let mut acc = 0.0f64;
                for r in 0..n {
                    acc += delta_data[r * out_dim + o] as f64;
                }
                *out = (acc * inv_n) as f32;
            }
        }
        layer_grads[l] = Some(LayerGradients {
            weights: dw,
            bias: db,
        });

        // dPrev[r][i] = sum_o delta[r][o] * W[o][i], then through the activation.
        let mut d_prev = Tensor::zeros(vec![n, in_dim]);
        {
            let delta_data = delta.data();
            let w = layer.weights.data();
            for_each_row(d_prev.data_mut(), in_dim, par, |r, row| {
                let mut acc = vec![0.0f64; in_dim];
                for o in 0..out_dim {
                    let d = delta_data[r * out_dim + o] as f64;
                    if d != 0.0 {
                        let wrow = &w[o * in_dim..(o + 1) * in_dim];
                        for i in 0..in_dim {
                            acc[i] += d * wrow[i] as f64;
                        }
                    }
                }
                for i in 0..in_dim {
                    row[i] = acc[i] as f32;
                }
            });
        }

        if l == 0 {
            for v in d_prev.data_mut() {
                *v = (*v as f64 * inv_n) as f32;
            }
            input_grad = Some(d_prev);
        } else {
            let prev_layer_act = model.layers[l - 1].activation;
            if prev_layer_act == Activation::Relu {
                let pre = &cache.pres[l - 1];
                let pre_data = pre.data();
                for (v, &z) in d_prev.data_mut().iter_mut().zip(pre_data) {
                    *v *= Activation::Relu.grad(z);
                }
            }
            delta = d_prev;
        }
    }

    Ok(GradientBundle {
        layers: layer_grads.into_iter().map(|g| g.expect("filled")).collect(),
        input: input_grad.expect("filled"),
        loss,
    })
}

/// Input gradient of a single sample given an upstream logit gradient and the
/// pre-activations recorded by `forward_single_cached` at the same point.
///
/// No `1/n` scaling is applied; `dlogits` is `d loss / d z` for this sample.
pub(crate) fn input_gradient_from_pres(
    model: &MlpModel,
    pres: &[Vec<f32>],
    dlogits: &[f32],
) -> Vec<f32> {
    let mut delta: Vec<f32> = dlogits.to_vec();
    for l in (0..model.layers.len()).rev() {
        let layer = &model.layers[l];
        let in_dim = layer.in_dim();
        let out_dim = layer.out_dim();
        let w = layer.weights.data();
        let mut acc = vec![0.0f64; in_dim];
        for o in 0..out_dim {
            let d = delta[o] as f64;
            if d != 0.0 {
                let wrow = &w[o * in_dim..(o + 1) * in_dim];
                for i in 0..in_dim {
                    acc[i] += d * wrow[i] as f64;
                }
            }
        }
        let mut d_prev: Vec<f32> = acc.iter().map(|&v| v as f32).collect();
        if l > 0 {
            let prev_layer = &model.layers[l - 1];
            if prev_layer.activation == Activation::Relu {
                for (v, &z) in d_prev.iter_mut().zip(&pres[l - 1]) {
                    *v *= Activation::Relu.grad(z);
                }
            }
        }
        delta = d_prev;
    }
    delta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::model::MlpModel;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn onehot(n: usize, c: usize, labels: &[usize]) -> Tensor {
        let mut data = vec![0.0f32; n * c];
        for (r, &y) in labels.iter().enumerate() {
            data[r * c + y] = 1.0;
        }
        Tensor::matrix(n, c, data).unwrap()
    }

    #[test]
    fn shapes_mirror_the_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = MlpModel::new_seeded(4, &[6, 5], 3, &mut rng).unwrap();
        let batch = Tensor::matrix(2, 4, vec![0.1; 8]).unwrap();
        let grads = backward(&model, &batch, &onehot(2, 3, &[0, 2])).unwrap();
        assert!(grads.shapes_mirror(&model));
        assert_eq!(grads.input.shape(), batch.shape());
        assert!(grads.loss.is_finite());
    }

    #[test]
    fn duplicating_rows_preserves_parameter_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = MlpModel::new_seeded(3, &[8], 4, &mut rng).unwrap();
        let data: Vec<f32> = (0..6).map(|i| (i as f32 * 0.3).cos().abs()).collect();
        let batch = Tensor::matrix(2, 3, data.clone()).unwrap();
        let mut doubled = data.clone();
        doubled.extend_from_slice(&data);
        let batch2 = Tensor::matrix(4, 3, doubled).unwrap();

        let g1 = backward(&model, &batch, &onehot(2, 4, &[1, 3])).unwrap();
        let g2 = backward(&model, &batch2, &onehot(4, 4, &[1, 3, 1, 3])).unwrap();
        for (a, b) in g1.layers.iter().zip(&g2.layers) {
            for (x, y) in a.weights.data().iter().zip(b.weights.data()) {
                assert!((x - y).abs() <= 1e-6, "{x} vs {y}");
            }
            for (x, y) in a.bias.data().iter().zip(b.bias.data()) {
                assert!((x - y).abs() <= 1e-6);
            }
        }
        assert!((g1.loss - g2.loss).abs() <= 1e-9);
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let model = MlpModel::new_seeded(6, &[16, 12], 4, &mut rng).unwrap();
        let data: Vec<f32> = (0..(32 * 6)).map(|i| ((i * 37 % 101) as f32) / 101.0).collect();
        let batch = Tensor::matrix(32, 6, data).unwrap();
        let labels: Vec<usize> = (0..32).map(|i| i % 4).collect();
        let targets = onehot(32, 4, &labels);
        let a = backward(&model, &batch, &targets).unwrap();
        let b = backward_seq(&model, &batch, &targets).unwrap();
        assert_eq!(a.loss.to_bits(), b.loss.to_bits());
        assert!(a.input.bitwise_eq(&b.input));
        for (x, y) in a.layers.iter().zip(&b.layers) {
            assert!(x.weights.bitwise_eq(&y.weights));
            assert!(x.bias.bitwise_eq(&y.bias));
        }
    }
}
