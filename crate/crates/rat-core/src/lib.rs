//! Regional adversarial training at desk scale.
//!
//! The crate bundles a minimal differentiable MLP engine with exact input and
//! parameter gradients, l-infinity attack kernels (FGSM, trajectory-recording
//! PGD, margin-ascent PGD), a region-based sampler with distance-aware label
//! smoothing, plain/adversarial/region training steps, dataset utilities, and
//! an evaluation harness.
//!
//! Batch work (attacks, evaluation, matrix kernels) fans out over the rayon
//! pool when the default `parallel` feature is enabled and falls back to
//! plain loops without it; both paths produce bit-identical results.

pub mod attacks;
pub mod data;
pub mod engine;
pub mod error;
pub mod eval;
pub mod parallel;
pub mod rat;
pub mod reference;
pub mod seeding;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
