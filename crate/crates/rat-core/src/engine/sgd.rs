//! SGD with momentum and decoupled-from-nothing classic weight decay:
//! `v <- momentum * v + (g + wd * p)`, `p <- p - lr * v`.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::backward::GradientBundle;
use super::model::MlpModel;

#[derive(Debug, Clone)]
struct LayerVelocity {
    weights: Tensor,
    bias: Tensor,
}

/// Optimizer state; velocity tensors mirror the parameters and start at zero.
#[derive(Debug, Clone)]
pub struct SgdState {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: Vec<LayerVelocity>,
}

impl SgdState {
    pub fn new(model: &MlpModel, learning_rate: f64, momentum: f64, weight_decay: f64) -> Result<Self> {
        if learning_rate <= 0.0 || !learning_rate.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must be in [0, 1), got {momentum}"
            )));
        }
        if weight_decay < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "weight decay must be nonnegative, got {weight_decay}"
            )));
        }
        let velocity = model
            .layers
            .iter()
            .map(|l| LayerVelocity {
                weights: Tensor::zeros(l.weights.shape().to_vec()),
                bias: Tensor::zeros(l.bias.shape().to_vec()),
            })
            .collect();
        Ok(Self {
            learning_rate,
            momentum,
            weight_decay,
            velocity,
        })
    }
}

/// One in-place parameter update. Rejects non-finite gradients.
pub fn sgd_step(model: &mut MlpModel, grads: &GradientBundle, state: &mut SgdState) -> Result<()> {
    if !grads.shapes_mirror(model) || state.velocity.len() != model.layers.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![model.layers.len()],
            got: vec![grads.layers.len()],
            context: "sgd_step gradients".into(),
        });
    }
    for (l, g) in grads.layers.iter().enumerate() {
        if !g.weights.is_finite() || !g.bias.is_finite() {
            return Err(Error::NonFinite {
                context: format!("gradient of layer {l} (loss {})", grads.loss),
            });
        }
    }

    let lr = state.learning_rate as f32;
    let mu = state.momentum as f32;
    let wd = state.weight_decay as f32;
    for ((layer, grad), vel) in model
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(&mut state.velocity)
    {
        update(layer.weights.data_mut(), grad.weights.data(), vel.weights.data_mut(), lr, mu, wd);
        update(layer.bias.data_mut(), grad.bias.data(), vel.bias.data_mut(), lr, mu, wd);
    }
    Ok(())
}

#[inline]
fn update(params: &mut [f32], grads: &[f32], vel: &mut [f32], lr: f32, mu: f32, wd: f32) {
    for i in 0..params.len() {
        vel[i] = mu * vel[i] + (grads[i] + wd * params[i]);
        params[i] -= lr * vel[i];
    }
}
