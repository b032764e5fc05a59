//! Region-based adversarial training.
//!
//! The sampler turns one PGD trajectory into a family of perturbed training
//! points: pick a direction point `x_bar` on the segment between the first
//! and end adversarial points, then scale along the ray from the benign point
//! `x`, `x_hat = x + s * (x_bar - x)` with `s` drawn from a finite scale set.
//! Larger scales land farther from the benign point and receive softer labels:
//! the true-class confidence decays linearly from `beta_max` at `s = 0` to
//! `beta_min` at `s = S`, all remaining mass spread evenly over the other
//! classes.

use rand::Rng;

use crate::attacks::{pgd_batch, pgd_invocation_count, AttackConfig, AttackPath};
use crate::engine::{backward, sgd_step, MlpModel, SgdState};
use crate::error::{Error, Result};
use crate::parallel::map_indexed;
use crate::seeding::RunSeeds;
use crate::tensor::Tensor;

/// Which trajectory points span the sampling segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DirectionSource {
    /// Segment between the first and end adversarial points.
    #[default]
    FirstEnd,
    /// Collapse the segment onto the end point; with `s = 1` and hard labels
    /// this reduces the method to standard adversarial training.
    EndOnly,
}

/// Sampler and label-smoothing hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RatConfig {
    /// Finite ascending set of nonnegative scale factors.
    pub scale_set: Vec<f64>,
    /// Largest admissible scale `S`; must equal the maximum of `scale_set`.
    pub max_scale: f64,
    /// Number of perturbed points drawn per benign point.
    pub samples_per_point: usize,
    /// True-class confidence at `s = 0`.
    pub beta_max: f64,
    /// True-class confidence at `s = S`.
    pub beta_min: f64,
    pub direction: DirectionSource,
}

impl RatConfig {
    pub fn new(
        scale_set: Vec<f64>,
        samples_per_point: usize,
        beta_max: f64,
        beta_min: f64,
    ) -> Result<Self> {
        let max_scale = scale_set.last().copied().unwrap_or(f64::NAN);
        let cfg = Self {
            scale_set,
            max_scale,
            samples_per_point,
            beta_max,
            beta_min,
            direction: DirectionSource::FirstEnd,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The degenerate configuration under which the method reduces to
    /// standard adversarial training: single sample at `s = 1`, hard labels,
    /// direction collapsed onto the end point.
    pub fn sat_equivalent() -> Self {
        Self {
            scale_set: vec![1.0],
            max_scale: 1.0,
            samples_per_point: 1,
            beta_max: 1.0,
            beta_min: 1.0,
            direction: DirectionSource::EndOnly,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale_set.is_empty() {
            return Err(Error::InvalidConfig("scale set is empty".into()));
        }
        if self.scale_set.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "scale set must be finite and nonnegative: {:?}",
                self.scale_set
            )));
        }
        if self.scale_set.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(format!(
                "scale set must be strictly ascending: {:?}",
                self.scale_set
            )));
        }
        let max = *self.scale_set.last().expect("nonempty");
        if self.max_scale != max {
            return Err(Error::InvalidConfig(format!(
                "max_scale {} != max of scale set {}",
                self.max_scale, max
            )));
        }
        if self.samples_per_point == 0 {
            return Err(Error::InvalidConfig("samples_per_point must be >= 1".into()));
        }
        if !(0.0 < self.beta_max && self.beta_max <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "beta_max must be in (0, 1], got {}",
                self.beta_max
            )));
        }
        if !(0.0 <= self.beta_min && self.beta_min <= self.beta_max) {
            return Err(Error::InvalidConfig(format!(
                "beta_min must be in [0, beta_max], got {} vs {}",
                self.beta_min, self.beta_max
            )));
        }
        Ok(())
    }
}

/// A sampled perturbed training point.
#[derive(Debug, Clone)]
pub struct PerturbedSample {
    pub x_hat: Tensor,
    /// Direction mixing weight drawn uniformly from [0, 1].
    pub lambda: f64,
    /// Magnitude scale drawn from the scale set.
    pub scale: f64,
    /// True when domain clipping changed at least one coordinate.
    pub clipped: bool,
}

/// A soft label over `c` classes with its smoothing factor.
#[derive(Debug, Clone)]
pub struct SoftLabel {
    pub probs: Vec<f64>,
    pub beta: f64,
}

/// Point on the segment between the adversarial endpoints.
///
/// Computed as `x_e + lambda * (x_f - x_e)`, algebraically equal to
/// `lambda * x_f + (1 - lambda) * x_e` but exact on a degenerate segment.
pub fn mix_endpoints(x_f: &Tensor, x_e: &Tensor, lambda: f64) -> Result<Tensor> {
    if x_f.shape() != x_e.shape() {
        return Err(Error::ShapeMismatch {
            expected: x_f.shape().to_vec(),
            got: x_e.shape().to_vec(),
            context: "mix_endpoints".into(),
        });
    }
    let data = x_f
        .data()
        .iter()
        .zip(x_e.data())
        .map(|(&f, &e)| (e as f64 + lambda * (f as f64 - e as f64)) as f32)
        .collect();
    Tensor::new(x_f.shape().to_vec(), data)
}

/// Draws `lambda ~ U(0, 1)` and returns the mixed direction point.
pub fn sample_direction<R: Rng>(
    x_f: &Tensor,
    x_e: &Tensor,
    rng: &mut R,
) -> Result<(Tensor, f64)> {
    let lambda = rng.gen::<f64>();
    let x_bar = mix_endpoints(x_f, x_e, lambda)?;
    Ok((x_bar, lambda))
}

/// `x + s * (x_bar - x)`, clipped to the unit box.
///
/// `s = 0` returns the benign point exactly and `s = 1` the direction point
/// exactly; no epsilon-ball projection is applied, the region deliberately
/// extends past the attack budget for `s > 1`.
pub fn scale_point(x: &Tensor, x_bar: &Tensor, s: f64) -> Result<(Tensor, bool)> {
    if x.shape() != x_bar.shape() {
        return Err(Error::ShapeMismatch {
            expected: x.shape().to_vec(),
            got: x_bar.shape().to_vec(),
            context: "scale_point".into(),
        });
    }
    if s == 0.0 {
        return Ok((x.clone(), false));
    }
    let mut clipped = false;
    let data: Vec<f32> = if s == 1.0 {
        x_bar
            .data()
            .iter()
            .map(|&v| {
                let c = v.clamp(0.0, 1.0);
                clipped |= c != v;
                c
            })
            .collect()
    } else {
        x.data()
            .iter()
            .zip(x_bar.data())
            .map(|(&xi, &bi)| {
                let raw = (xi as f64 + s * (bi as f64 - xi as f64)) as f32;
                let c = raw.clamp(0.0, 1.0);
                clipped |= c != raw;
                c
            })
            .collect()
    };
    Ok((Tensor::new(x.shape().to_vec(), data)?, clipped))
}

/// Draws a scale from the set and builds the perturbed point.
pub fn sample_perturbed<R: Rng>(
    x: &Tensor,
    x_bar: &Tensor,
    lambda: f64,
    cfg: &RatConfig,
    rng: &mut R,
) -> Result<PerturbedSample> {
    let s = cfg.scale_set[rng.gen_range(0..cfg.scale_set.len())];
    let (x_hat, clipped) = scale_point(x, x_bar, s)?;
    Ok(PerturbedSample {
        x_hat,
        lambda,
        scale: s,
        clipped,
    })
}

/// Smoothing factor for scale `s`: linear decay from `beta_max` to `beta_min`.
pub fn dls_beta(s: f64, cfg: &RatConfig) -> Result<f64> {
    if !(0.0..=cfg.max_scale).contains(&s) {
        return Err(Error::ScaleOutOfRange {
            scale: s,
            max_scale: cfg.max_scale,
        });
    }
    // At s = 0 the answer is beta_max regardless of S; also covers S = 0.
    if s == 0.0 {
        return Ok(cfg.beta_max);
    }
    Ok(cfg.beta_max - s * (cfg.beta_max - cfg.beta_min) / cfg.max_scale)
}

/// Soft label with true-class mass `beta` and the rest spread uniformly.
pub fn dls_label(label: usize, num_classes: usize, beta: f64) -> Result<SoftLabel> {
    if num_classes < 2 {
        return Err(Error::InvalidConfig(format!(
            "soft labels need >= 2 classes, got {num_classes}"
        )));
    }
    if label >= num_classes {
        return Err(Error::InvalidConfig(format!(
            "label {label} out of range for {num_classes} classes"
        )));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::BetaOutOfRange(beta));
    }
    let off = (1.0 - beta) / (num_classes - 1) as f64;
    let mut probs = vec![off; num_classes];
    probs[label] = beta;
    Ok(SoftLabel { probs, beta })
}

/// Draws `m` perturbed points with their soft labels from one attack path.
///
/// Per sample the mixing weight is drawn first and the scale second; the
/// label uses the drawn scale, not the post-clipping distance.
pub fn ars_sample<R: Rng>(
    x: &Tensor,
    label: usize,
    num_classes: usize,
    path: &AttackPath,
    cfg: &RatConfig,
    rng: &mut R,
) -> Result<Vec<(PerturbedSample, SoftLabel)>> {
    cfg.validate()?;
    let (x_f, x_e, _found) = path.first_end_points();
    let (x_f, x_e) = match cfg.direction {
        DirectionSource::FirstEnd => (x_f, x_e),
        DirectionSource::EndOnly => (x_e, x_e),
    };
    let mut out = Vec::with_capacity(cfg.samples_per_point);
    for _ in 0..cfg.samples_per_point {
        let (x_bar, lambda) = sample_direction(x_f, x_e, rng)?;
        let sample = sample_perturbed(x, &x_bar, lambda, cfg, rng)?;
        let beta = dls_beta(sample.scale, cfg)?;
        let soft = dls_label(label, num_classes, beta)?;
        out.push((sample, soft));
    }
    Ok(out)
}

/// Per-step training telemetry.
#[derive(Debug, Clone, Copy)]
pub struct StepMetrics {
    /// Mean loss over the assembled training batch.
    pub loss: f64,
    /// Fraction of attack paths without any successful iterate.
    pub pgd_fail_frac: f64,
    /// Mean drawn scale over all sampled points.
    pub mean_s: f64,
    /// Mean smoothing factor over all sampled points.
    pub mean_beta: f64,
    /// PGD invocations made by this step (process-wide counter delta).
    pub pgd_invocations: u64,
}

fn one_hot_targets(labels: &[usize], num_classes: usize) -> Tensor {
    let n = labels.len();
    let mut data = vec![0.0f32; n * num_classes];
    for (r, &y) in labels.iter().enumerate() {
        data[r * num_classes + y] = 1.0;
    }
    Tensor::matrix(n, num_classes, data).expect("consistent shape")
}

fn check_batch(inputs: &Tensor, labels: &[usize]) -> Result<usize> {
    let n = inputs.rows();
    if n == 0 {
        return Err(Error::EmptyDataset("training batch".into()));
    }
    if labels.len() != n {
        return Err(Error::ShapeMismatch {
            expected: vec![n],
            got: vec![labels.len()],
            context: "batch labels".into(),
        });
    }
    Ok(n)
}

/// Plain training step on the clean batch with one-hot labels.
pub fn st_train_step(
    model: &mut MlpModel,
    inputs: &Tensor,
    labels: &[usize],
    sgd: &mut SgdState,
) -> Result<StepMetrics> {
    check_batch(inputs, labels)?;
    let targets = one_hot_targets(labels, model.num_classes);
    let grads = backward(model, inputs, &targets)?;
    let loss = grads.loss;
    sgd_step(model, &grads, sgd)?;
    Ok(StepMetrics {
        loss,
        pgd_fail_frac: 0.0,
        mean_s: 0.0,
        mean_beta: 1.0,
        pgd_invocations: 0,
    })
}

/// Adversarial training step on the PGD end points with one-hot labels.
pub fn sat_train_step(
    model: &mut MlpModel,
    inputs: &Tensor,
    labels: &[usize],
    attack_cfg: &AttackConfig,
    sgd: &mut SgdState,
    seeds: &RunSeeds,
    step: u64,
) -> Result<StepMetrics> {
    let n = check_batch(inputs, labels)?;
    let attack_seeds: Vec<u64> = (0..n).map(|i| seeds.attack_seed(step, i as u64)).collect();
    let calls_before = pgd_invocation_count();
    let paths = pgd_batch(model, inputs, labels, attack_cfg, &attack_seeds)?;
    let pgd_invocations = pgd_invocation_count() - calls_before;

    let d = inputs.cols();
    let mut data = Vec::with_capacity(n * d);
    for path in &paths {
        data.extend_from_slice(path.end_point().data());
    }
    let adv_batch = Tensor::matrix(n, d, data)?;
    let targets = one_hot_targets(labels, model.num_classes);
    let grads = backward(model, &adv_batch, &targets)?;
    let loss = grads.loss;
    sgd_step(model, &grads, sgd)?;

    let failed = paths.iter().filter(|p| p.first_adv_index.is_none()).count();
    Ok(StepMetrics {
        loss,
        pgd_fail_frac: failed as f64 / n as f64,
        mean_s: 1.0,
        mean_beta: 1.0,
        pgd_invocations,
    })
}

/// Region-based training step: one PGD path per benign point, `m` sampled
/// perturbed points each, soft labels, a single parameter update on the
/// `n * m` assembled batch.
pub fn rat_train_step(
    model: &mut MlpModel,
    inputs: &Tensor,
    labels: &[usize],
    attack_cfg: &AttackConfig,
    rat_cfg: &RatConfig,
    sgd: &mut SgdState,
    seeds: &RunSeeds,
    step: u64,
) -> Result<StepMetrics> {
    let n = check_batch(inputs, labels)?;
    rat_cfg.validate()?;
    let c = model.num_classes;
    let m = rat_cfg.samples_per_point;

    let attack_seeds: Vec<u64> = (0..n).map(|i| seeds.attack_seed(step, i as u64)).collect();
    let calls_before = pgd_invocation_count();
    let paths = pgd_batch(model, inputs, labels, attack_cfg, &attack_seeds)?;
    let pgd_invocations = pgd_invocation_count() - calls_before;

    let frozen: &MlpModel = model;
    let sampled: Vec<Result<Vec<(PerturbedSample, SoftLabel)>>> = {
        let paths = &paths;
        map_indexed(n, move |i| {
            let x = Tensor::from_vec(inputs.row(i).to_vec());
            let mut rng = seeds.ars_rng(step, i as u64);
            ars_sample(&x, labels[i], frozen.num_classes, &paths[i], rat_cfg, &mut rng)
        })
    };

    let d = inputs.cols();
    let mut batch_data = Vec::with_capacity(n * m * d);
    let mut target_data = Vec::with_capacity(n * m * c);
    let mut sum_s = 0.0f64;
    let mut sum_beta = 0.0f64;
    for per_point in sampled {
        let per_point = per_point?;
        for (sample, soft) in per_point {
            batch_data.extend_from_slice(sample.x_hat.data());
            target_data.extend(soft.probs.iter().map(|&p| p as f32));
            sum_s += sample.scale;
            sum_beta += soft.beta;
        }
    }
    let big_batch = Tensor::matrix(n * m, d, batch_data)?;
    let big_targets = Tensor::matrix(n * m, c, target_data)?;

    let grads = backward(model, &big_batch, &big_targets)?;
    let loss = grads.loss;
    sgd_step(model, &grads, sgd)?;

    let failed = paths.iter().filter(|p| p.first_adv_index.is_none()).count();
    let total = (n * m) as f64;
    Ok(StepMetrics {
        loss,
        pgd_fail_frac: failed as f64 / n as f64,
        mean_s: sum_s / total,
        mean_beta: sum_beta / total,
        pgd_invocations,
    })
}
