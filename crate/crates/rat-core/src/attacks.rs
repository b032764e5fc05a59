//! White-box l-infinity attack kernels: FGSM, trajectory-recording PGD, and a
//! margin-ascent PGD variant.
//!
//! Every iterate is projected onto the epsilon-ball around the benign point
//! first and clipped to the `[0, 1]` domain second. `sign(0)` is defined as 0
//! so exact-zero gradients never drift. Attacks on distinct samples are
//! independent given a frozen model and per-sample seeds, so batch helpers
//! fan out over the rayon pool when the `parallel` feature is on.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::engine::{argmax, forward_single, forward_single_cached, input_gradient_from_pres};
use crate::engine::{softmax_row, MlpModel};
use crate::error::{Error, Result};
use crate::parallel::{map_indexed, map_indexed_seq};
use crate::tensor::Tensor;

/// Loss ascended by the iterative attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    CrossEntropy,
    CwMargin,
}

/// Attack hyperparameters, all in input-space units.
#[derive(Debug, Clone, Copy)]
pub struct AttackConfig {
    /// l-infinity budget epsilon.
    pub epsilon: f32,
    /// Step size alpha.
    pub alpha: f32,
    /// Iteration count K.
    pub iterations: usize,
    /// Start from a uniform draw inside the ball instead of the benign point.
    pub random_start: bool,
    pub loss_kind: LossKind,
}

impl AttackConfig {
    pub fn new(epsilon: f32, alpha: f32, iterations: usize, random_start: bool) -> Self {
        Self {
            epsilon,
            alpha,
            iterations,
            random_start,
            loss_kind: LossKind::CrossEntropy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be nonnegative, got {}",
                self.epsilon
            )));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Recorded PGD trajectory of one benign sample.
///
/// `points[t]` is the iterate after step `t + 1`; the benign point itself is
/// not part of the sequence. `success[t]` records whether `points[t]` was
/// misclassified at generation time.
#[derive(Debug, Clone)]
pub struct AttackPath {
    pub points: Vec<Tensor>,
    pub success: Vec<bool>,
    /// Smallest index with `success[t] == true`, if any.
    pub first_adv_index: Option<usize>,
    pub benign: Tensor,
    pub label: usize,
}

impl AttackPath {
    /// Final iterate of the trajectory.
    pub fn end_point(&self) -> &Tensor {
        self.points.last().expect("attack path has K >= 1 points")
    }

    /// First and end adversarial points.
    ///
    /// When no iterate was misclassified, both fall back to the end point and
    /// `found` is false; the caller sees a single-direction degenerate region.
    pub fn first_end_points(&self) -> (&Tensor, &Tensor, bool) {
        first_end_points(self)
    }
}

/// See [`AttackPath::first_end_points`].
pub fn first_end_points(path: &AttackPath) -> (&Tensor, &Tensor, bool) {
    let end = path.end_point();
    match path.first_adv_index {
        Some(t) => (&path.points[t], end, true),
        None => (end, end, false),
    }
}

static PGD_CALLS: AtomicU64 = AtomicU64::new(0);

/// Process-wide count of [`pgd`] invocations, for cost instrumentation.
pub fn pgd_invocation_count() -> u64 {
    PGD_CALLS.load(Ordering::Relaxed)
}

#[inline]
fn sign(v: f32) -> f32 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Upstream logit gradient of the cross-entropy at a one-hot label.
fn ce_dlogits(logits: &[f32], label: usize) -> Vec<f32> {
    let probs = softmax_row(logits);
    let mut d: Vec<f32> = probs.iter().map(|&p| p as f32).collect();
    d[label] -= 1.0;
    d
}

/// Upstream logit gradient of the margin `max_{i != y} z_i - z_y`.
fn margin_dlogits(logits: &[f32], label: usize) -> Vec<f32> {
    let mut best: Option<usize> = None;
    for (i, &z) in logits.iter().enumerate() {
        if i == label {
            continue;
        }
        if best.map_or(true, |b| z > logits[b]) {
            best = Some(i);
        }
    }
    let runner_up = best.expect("margin needs c >= 2");
    let mut d = vec![0.0f32; logits.len()];
    d[runner_up] = 1.0;
    d[label] = -1.0;
    d
}

fn dlogits_for(kind: LossKind, logits: &[f32], label: usize) -> Vec<f32> {
    match kind {
        LossKind::CrossEntropy => ce_dlogits(logits, label),
        LossKind::CwMargin => margin_dlogits(logits, label),
    }
}

/// Single signed-gradient step on the cross-entropy:
/// `x' = clip_[0,1](x + eps * sign(grad))`.
pub fn fgsm(model: &MlpModel, x: &Tensor, label: usize, epsilon: f32) -> Result<Tensor> {
    debug_assert!(x.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    model.validate()?;
    let (pres, logits) = forward_single_cached(model, x.data());
    let dlogits = ce_dlogits(&logits, label);
    let grad = input_gradient_from_pres(model, &pres, &dlogits);
    let out: Vec<f32> = x
        .data()
        .iter()
        .zip(&grad)
        .map(|(&xi, &gi)| (xi + epsilon * sign(gi)).clamp(0.0, 1.0))
        .collect();
    Ok(Tensor::from_vec(out))
}

/// K-step projected signed-gradient ascent, recording the full trajectory.
pub fn pgd<R: Rng>(
    model: &MlpModel,
    x: &Tensor,
    label: usize,
    cfg: &AttackConfig,
    rng: &mut R,
) -> Result<AttackPath> {
    debug_assert!(x.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    cfg.validate()?;
    model.validate()?;
    PGD_CALLS.fetch_add(1, Ordering::Relaxed);

    let d = x.len();
    let xd = x.data();
    // Ball bounds, fixed for the whole trajectory.
    let lo: Vec<f32> = xd.iter().map(|&v| v - cfg.epsilon).collect();
    let hi: Vec<f32> = xd.iter().map(|&v| v + cfg.epsilon).collect();

    let mut cur: Vec<f32> = if cfg.random_start {
        (0..d)
            .map(|i| {
                let l = lo[i].max(0.0);
                let h = hi[i].min(1.0);
                if h > l {
                    rng.gen_range(l..=h)
                } else {
                    l
                }
            })
            .collect()
    } else {
        xd.to_vec()
    };

    let k = cfg.iterations;
    let mut points: Vec<Tensor> = Vec::with_capacity(k);
    let mut success: Vec<bool> = Vec::with_capacity(k);
    for t in 0..k {
        let (pres, logits) = forward_single_cached(model, &cur);
        if t > 0 {
            success.push(argmax(&logits) != label);
        }
        let dlogits = dlogits_for(cfg.loss_kind, &logits, label);
        let grad = input_gradient_from_pres(model, &pres, &dlogits);
        for i in 0..d {
            let stepped = cur[i] + cfg.alpha * sign(grad[i]);
            cur[i] = stepped.clamp(lo[i], hi[i]).clamp(0.0, 1.0);
        }
        points.push(Tensor::from_vec(cur.clone()));
    }
    let logits_end = forward_single(model, &cur);
    success.push(argmax(&logits_end) != label);

    let first_adv_index = success.iter().position(|&s| s);
    Ok(AttackPath {
        points,
        success,
        first_adv_index,
        benign: x.clone(),
        label,
    })
}

/// PGD ascending the untargeted margin loss; returns the final iterate only.
pub fn cw_pgd<R: Rng>(
    model: &MlpModel,
    x: &Tensor,
    label: usize,
    cfg: &AttackConfig,
    rng: &mut R,
) -> Result<Tensor> {
    let mut margin_cfg = *cfg;
    margin_cfg.loss_kind = LossKind::CwMargin;
    let path = pgd(model, x, label, &margin_cfg, rng)?;
    Ok(path.points.into_iter().last().expect("K >= 1"))
}

fn gather_paths(
    model: &MlpModel,
    inputs: &Tensor,
    labels: &[usize],
    cfg: &AttackConfig,
    seeds: &[u64],
    parallel: bool,
) -> Result<Vec<AttackPath>> {
    let n = inputs.rows();
    assert_eq!(labels.len(), n, "one label per row");
    assert_eq!(seeds.len(), n, "one seed per row");
    let run = |i: usize| -> Result<AttackPath> {
        let x = Tensor::from_vec(inputs.row(i).to_vec());
        let mut rng = ChaCha8Rng::seed_from_u64(seeds[i]);
        pgd(model, &x, labels[i], cfg, &mut rng)
    };
    let results = if parallel {
        map_indexed(n, run)
    } else {
        map_indexed_seq(n, run)
    };
    results.into_iter().collect()
}

/// One PGD trajectory per row of `inputs`, in row order.
///
/// `seeds[i]` seeds sample `i`'s random start, so results are independent of
/// the thread count.
pub fn pgd_batch(
    model: &MlpModel,
    inputs: &Tensor,
    labels: &[usize],
    cfg: &AttackConfig,
    seeds: &[u64],
) -> Result<Vec<AttackPath>> {
    gather_paths(model, inputs, labels, cfg, seeds, true)
}

/// Sequential twin of [`pgd_batch`]; bit-identical output.
pub fn pgd_batch_seq(
    model: &MlpModel,
    inputs: &Tensor,
    labels: &[usize],
    cfg: &AttackConfig,
    seeds: &[u64],
) -> Result<Vec<AttackPath>> {
    gather_paths(model, inputs, labels, cfg, seeds, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Activation, DenseLayer};

    fn seeded_model(seed: u64, dims: (usize, &[usize], usize)) -> MlpModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        MlpModel::new_seeded(dims.0, dims.1, dims.2, &mut rng).unwrap()
    }

    fn unit_box_point(d: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_vec((0..d).map(|_| rng.gen_range(0.0..=1.0)).collect())
    }

    #[test]
    fn fgsm_with_zero_epsilon_is_identity() {
        let model = seeded_model(1, (4, &[6], 3));
        let x = unit_box_point(4, 2);
        let out = fgsm(&model, &x, 0, 0.0).unwrap();
        assert!(out.bitwise_eq(&x));
    }

    #[test]
    fn fgsm_saturates_toward_one_for_positive_gradient() {
        // Linear 2-class model where class-1 logit grows with every input:
        // gradient of CE at label 0 is positive everywhere.
        let w = DenseLayer::from_parts(
            Tensor::matrix(2, 3, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap(),
            Tensor::zeros(vec![2]),
            Activation::Identity,
        )
        .unwrap();
        let model = MlpModel::from_layers(vec![w], 2).unwrap();
        let x = Tensor::from_vec(vec![0.5, 0.2, 0.95]);
        let eps = 0.1;
        let out = fgsm(&model, &x, 0, eps).unwrap();
        for (o, xi) in out.data().iter().zip(x.data()) {
            assert_eq!(*o, (xi + eps).min(1.0));
        }
    }

    #[test]
    fn fgsm_equals_single_step_pgd_bitwise() {
        for seed in 0..20u64 {
            let model = seeded_model(seed, (5, &[8, 6], 3));
            let x = unit_box_point(5, seed + 100);
            let eps = 0.07;
            let a = fgsm(&model, &x, (seed % 3) as usize, eps).unwrap();
            let cfg = AttackConfig::new(eps, eps, 1, false);
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let path = pgd(&model, &x, (seed % 3) as usize, &cfg, &mut rng).unwrap();
            assert!(a.bitwise_eq(path.end_point()), "seed {seed}");
        }
    }

    #[test]
    fn pgd_with_zero_epsilon_stays_at_benign_point() {
        let model = seeded_model(3, (4, &[6], 3));
        let x = unit_box_point(4, 9);
        let cfg = AttackConfig::new(0.0, 0.01, 5, true);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let path = pgd(&model, &x, 1, &cfg, &mut rng).unwrap();
        let clean_wrong = argmax(&forward_single(&model, x.data())) != 1;
        for (p, &s) in path.points.iter().zip(&path.success) {
            assert!(p.bitwise_eq(&x));
            assert_eq!(s, clean_wrong);
        }
    }

    #[test]
    fn trajectory_stays_in_ball_and_domain() {
        for seed in 0..30u64 {
            let model = seeded_model(seed, (6, &[10], 4));
            let x = unit_box_point(6, seed + 7);
            let cfg = AttackConfig::new(0.12, 0.03, 8, true);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let path = pgd(&model, &x, (seed % 4) as usize, &cfg, &mut rng).unwrap();
            assert_eq!(path.points.len(), 8);
            assert_eq!(path.success.len(), 8);
            for p in &path.points {
                assert!(p.linf_distance(&x).unwrap() <= cfg.epsilon + 1e-6);
                assert!(p.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
        }
    }

    #[test]
    fn linear_model_trajectory_matches_closed_form() {
        // 2-class linear model in 2-D: logits = Wx. The CE gradient wrt x is
        // p1 * (w1 - w0), so the sign pattern is constant along the path and
        // x'_t = clip(x + min(t * alpha, eps) * sign(w1 - w0)).
        let w = DenseLayer::from_parts(
            Tensor::matrix(2, 2, vec![1.0, -0.5, -1.0, 0.5]).unwrap(),
            Tensor::zeros(vec![2]),
            Activation::Identity,
        )
        .unwrap();
        let model = MlpModel::from_layers(vec![w], 2).unwrap();
        let x = Tensor::from_vec(vec![0.5, 0.5]);
        let cfg = AttackConfig::new(0.09, 0.02, 7, false);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let path = pgd(&model, &x, 0, &cfg, &mut rng).unwrap();
        let dir = [-1.0f32, 1.0]; // sign(w1 - w0)
        for (t, p) in path.points.iter().enumerate() {
            let reach = (cfg.alpha * (t + 1) as f32).min(cfg.epsilon);
            for i in 0..2 {
                let expected = (x.data()[i] + reach * dir[i]).clamp(0.0, 1.0);
                assert!(
                    (p.data()[i] - expected).abs() < 1e-6,
                    "step {t} coord {i}: {} vs {expected}",
                    p.data()[i]
                );
            }
        }
    }

    #[test]
    fn cw_zero_epsilon_is_identity_and_respects_constraints() {
        let model = seeded_model(11, (5, &[9], 3));
        let x = unit_box_point(5, 5);
        let cfg = AttackConfig::new(0.0, 0.02, 4, false);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = cw_pgd(&model, &x, 0, &cfg, &mut rng).unwrap();
        assert!(out.bitwise_eq(&x));

        let cfg = AttackConfig::new(0.1, 0.03, 6, true);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = cw_pgd(&model, &x, 0, &cfg, &mut rng).unwrap();
        assert!(out.linf_distance(&x).unwrap() <= cfg.epsilon + 1e-6);
        assert!(out.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn cw_margin_gradient_sign_matches_finite_differences() {
        // Binary classifier: margin is z_{1-y} - z_y. Recover the sign of the
        // attack gradient from a single tiny CW step and compare against
        // central differences of the reference margin.
        let model = seeded_model(23, (4, &[7], 2));
        let x = unit_box_point(4, 40);
        let label = 0usize;
        let alpha = 1e-3f32;
        let cfg = AttackConfig::new(0.5, alpha, 1, false);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let stepped = cw_pgd(&model, &x, label, &cfg, &mut rng).unwrap();
        for i in 0..4 {
            let fd = crate::reference::central_difference(x.data(), i, 1e-4, |v| {
                crate::reference::margin_f64(&model, v, label)
            });
            if fd.abs() > 1e-4 {
                let moved = stepped.data()[i] - x.data()[i];
                assert!(
                    (moved as f64) * fd > 0.0,
                    "coord {i}: moved {moved} but fd {fd}"
                );
            }
        }
    }

    #[test]
    fn first_end_points_follow_definition() {
        let mk = |success: Vec<bool>| {
            let points: Vec<Tensor> = (0..success.len())
                .map(|i| Tensor::from_vec(vec![i as f32]))
                .collect();
            AttackPath {
                first_adv_index: success.iter().position(|&s| s),
                points,
                success,
                benign: Tensor::from_vec(vec![0.0]),
                label: 0,
            }
        };

        let path = mk(vec![false, true, true]);
        let (f, e, found) = first_end_points(&path);
        assert!(found);
        assert_eq!(f.data(), &[1.0]);
        assert_eq!(e.data(), &[2.0]);

        let path = mk(vec![true, false, false]);
        let (f, _, found) = first_end_points(&path);
        assert!(found);
        assert_eq!(f.data(), &[0.0]);

        let path = mk(vec![false, false, false]);
        let (f, e, found) = first_end_points(&path);
        assert!(!found);
        assert_eq!(f.data(), e.data());
        assert_eq!(f.data(), &[2.0]);
    }

    #[test]
    fn same_seed_gives_identical_trajectories() {
        let model = seeded_model(31, (4, &[8], 3));
        let x = unit_box_point(4, 77);
        let cfg = AttackConfig::new(0.1, 0.02, 6, true);
        let mut r1 = ChaCha8Rng::seed_from_u64(99);
        let mut r2 = ChaCha8Rng::seed_from_u64(99);
        let p1 = pgd(&model, &x, 0, &cfg, &mut r1).unwrap();
        let p2 = pgd(&model, &x, 0, &cfg, &mut r2).unwrap();
        for (a, b) in p1.points.iter().zip(&p2.points) {
            assert!(a.bitwise_eq(b));
        }
        assert_eq!(p1.success, p2.success);
    }

    #[test]
    fn batch_parallel_matches_sequential() {
        let model = seeded_model(41, (4, &[8], 3));
        let n = 24;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<f32> = (0..n * 4).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let inputs = Tensor::matrix(n, 4, data).unwrap();
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let seeds: Vec<u64> = (0..n as u64).map(|i| 1000 + i).collect();
        let cfg = AttackConfig::new(0.08, 0.02, 5, true);
        let par = pgd_batch(&model, &inputs, &labels, &cfg, &seeds).unwrap();
        let seq = pgd_batch_seq(&model, &inputs, &labels, &cfg, &seeds).unwrap();
        for (a, b) in par.iter().zip(&seq) {
            assert_eq!(a.success, b.success);
            for (p, q) in a.points.iter().zip(&b.points) {
                assert!(p.bitwise_eq(q));
            }
        }
    }
}
