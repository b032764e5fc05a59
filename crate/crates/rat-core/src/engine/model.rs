//! Fully-connected classifier model.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Elementwise activation of a dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, v: f32) -> f32 {
        match self {
            Activation::Relu => {
                if v > 0.0 {
                    v
                } else {
                    0.0
                }
            }
            Activation::Identity => v,
        }
    }

    /// Derivative at pre-activation `v`; the ReLU subgradient at 0 is 0.
    #[inline]
    pub fn grad(self, v: f32) -> f32 {
        match self {
            Activation::Relu => {
                if v > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    /// Stable numeric code used by the checkpoint format.
    pub fn code(self) -> u32 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
        }
    }

    pub fn from_code(code: u32) -> Result<Self> {
        match code {
            0 => Ok(Activation::Identity),
            1 => Ok(Activation::Relu),
            other => Err(Error::BadCheckpoint(format!(
                "unknown activation code {other}"
            ))),
        }
    }
}

/// Dense layer `y = act(W x + b)` with row-major weights of shape `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

impl DenseLayer {
    /// He-style init: weights ~ N(0, 2/fan_in), bias zero.
    pub fn new_seeded<R: Rng>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let std = (2.0 / in_dim as f64).sqrt();
        let dist = Normal::new(0.0, std).expect("valid normal");
        let data: Vec<f32> = (0..in_dim * out_dim)
            .map(|_| dist.sample(rng) as f32)
            .collect();
        Self {
            weights: Tensor::matrix(out_dim, in_dim, data).expect("consistent shape"),
            bias: Tensor::zeros(vec![out_dim]),
            activation,
        }
    }

    pub fn from_parts(weights: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        if weights.shape().len() != 2 {
            return Err(Error::ShapeMismatch {
                expected: vec![0, 0],
                got: weights.shape().to_vec(),
                context: "layer weights must be 2-D".into(),
            });
        }
        if bias.shape() != [weights.rows()] {
            return Err(Error::ShapeMismatch {
                expected: vec![weights.rows()],
                got: bias.shape().to_vec(),
                context: "layer bias".into(),
            });
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }
}

/// Feed-forward classifier; the final layer is identity and emits raw logits.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<DenseLayer>,
    pub num_classes: usize,
}

impl MlpModel {
    /// Builds `input_dim -> hidden[0] -> ... -> num_classes` with ReLU hidden
    /// layers and an identity output layer.
    pub fn new_seeded<R: Rng>(
        input_dim: usize,
        hidden: &[usize],
        num_classes: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if input_dim == 0 || num_classes < 2 || hidden.iter().any(|&w| w == 0) {
            return Err(Error::InvalidConfig(format!(
                "bad model dims: input {input_dim}, hidden {hidden:?}, classes {num_classes}"
            )));
        }
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut width = input_dim;
        for &h in hidden {
            layers.push(DenseLayer::new_seeded(width, h, Activation::Relu, rng));
            width = h;
        }
        layers.push(DenseLayer::new_seeded(
            width,
            num_classes,
            Activation::Identity,
            rng,
        ));
        Ok(Self {
            layers,
            num_classes,
        })
    }

    pub fn from_layers(layers: Vec<DenseLayer>, num_classes: usize) -> Result<Self> {
        let model = Self {
            layers,
            num_classes,
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks width chaining and the raw-logit output contract.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidConfig("model has no layers".into()));
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::LayerDimension {
                    layer: i + 1,
                    expected: pair[0].out_dim(),
                    got: pair[1].in_dim(),
                });
            }
        }
        let last = self.layers.last().expect("nonempty");
        if last.out_dim() != self.num_classes {
            return Err(Error::InvalidConfig(format!(
                "final layer width {} != num_classes {}",
                last.out_dim(),
                self.num_classes
            )));
        }
        if last.activation != Activation::Identity {
            return Err(Error::InvalidConfig(
                "final layer must emit raw logits (identity activation)".into(),
            ));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// True when every parameter of both models is bit-identical.
    pub fn bitwise_eq(&self, other: &MlpModel) -> bool {
        self.num_classes == other.num_classes
            && self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.activation == b.activation
                    && a.weights.bitwise_eq(&b.weights)
                    && a.bias.bitwise_eq(&b.bias)
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn seeded_init_is_reproducible() {
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        let a = MlpModel::new_seeded(4, &[8, 8], 3, &mut r1).unwrap();
        let b = MlpModel::new_seeded(4, &[8, 8], 3, &mut r2).unwrap();
        assert!(a.bitwise_eq(&b));
    }

    #[test]
    fn widths_must_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let l1 = DenseLayer::new_seeded(2, 4, Activation::Relu, &mut rng);
        let l2 = DenseLayer::new_seeded(5, 3, Activation::Identity, &mut rng);
        let err = MlpModel::from_layers(vec![l1, l2], 3).unwrap_err();
        assert!(matches!(err, Error::LayerDimension { layer: 1, .. }));
    }

    #[test]
    fn final_layer_must_match_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let l1 = DenseLayer::new_seeded(2, 4, Activation::Relu, &mut rng);
        let l2 = DenseLayer::new_seeded(4, 3, Activation::Identity, &mut rng);
        assert!(MlpModel::from_layers(vec![l1, l2], 2).is_err());
    }
}
