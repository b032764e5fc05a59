//! Minimal differentiable MLP classifier: forward, exact reverse-mode
//! gradients for parameters and inputs, SGD with momentum, checkpoints.

mod backward;
mod checkpoint;
mod forward;
mod loss;
mod model;
mod sgd;

pub use backward::{backward, backward_seq, GradientBundle, LayerGradients};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use forward::{forward, forward_seq};
pub use loss::{predict, soft_cross_entropy};
pub use model::{Activation, DenseLayer, MlpModel};
pub use sgd::{sgd_step, SgdState};

pub(crate) use backward::input_gradient_from_pres;
pub(crate) use forward::{forward_single, forward_single_cached};
pub(crate) use loss::{argmax, onehot_cross_entropy_single, softmax_row};
