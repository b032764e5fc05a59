//! Evaluation protocol: clean/robust accuracy, iteration and budget sweeps,
//! generalization gaps, the loss-vs-scale probe, and gradient-masking checks.
//!
//! Counting rule: a sample misclassified on the clean input counts as a
//! robustness failure without running the attack, so robust accuracy can
//! never exceed clean accuracy. Per-sample attack streams are derived from a
//! base seed and the sample index; sweeps reuse the same base seed for every
//! point so curves differ only in the swept parameter.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attacks::{cw_pgd, fgsm, pgd, AttackConfig, AttackPath};
use crate::data::Dataset;
use crate::engine::{argmax, forward_single, onehot_cross_entropy_single, MlpModel};
use crate::error::{Error, Result};
use crate::parallel::{map_indexed, map_indexed_seq};
use crate::rat::{mix_endpoints, scale_point};
use crate::seeding::derive_seed;
use crate::tensor::Tensor;

/// Attack used by the robust-accuracy counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    Fgsm,
    Pgd,
    CwPgd,
}

impl AttackKind {
    pub fn name(&self) -> &'static str {
        match self {
            AttackKind::Fgsm => "fgsm",
            AttackKind::Pgd => "pgd",
            AttackKind::CwPgd => "cw",
        }
    }
}

/// Clean and per-attack robust accuracy of one model on one dataset.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub clean_accuracy: f64,
    /// (attack name, robust accuracy) in a fixed order.
    pub robust_accuracy: Vec<(String, f64)>,
    pub n_evaluated: usize,
}

/// Robust accuracy along one swept attack parameter.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: SweepAxis,
    /// (axis value, robust accuracy), axis strictly increasing.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    PgdIterations,
    PgdEpsilon,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::PgdIterations => "pgd_iterations",
            SweepAxis::PgdEpsilon => "pgd_epsilon",
        }
    }
}

/// Loss and attack outcome along one sampling direction at growing scales.
#[derive(Debug, Clone)]
pub struct ScaleProbe {
    pub records: Vec<ScaleRecord>,
}

#[derive(Debug, Clone, Copy)]
pub struct ScaleRecord {
    pub scale: f64,
    pub loss: f64,
    pub adversarial: bool,
}

fn check_nonempty(dataset: &Dataset) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset(dataset.name.clone()));
    }
    Ok(())
}

/// Fraction of samples classified correctly on clean inputs.
pub fn clean_accuracy(model: &MlpModel, dataset: &Dataset) -> Result<f64> {
    check_nonempty(dataset)?;
    model.validate()?;
    let n = dataset.len();
    let correct: Vec<bool> = map_indexed(n, |i| {
        let logits = forward_single(model, dataset.inputs.row(i));
        argmax(&logits) == dataset.labels[i]
    });
    Ok(correct.iter().filter(|&&c| c).count() as f64 / n as f64)
}

fn robust_accuracy_impl(
    model: &MlpModel,
    dataset: &Dataset,
    kind: AttackKind,
    cfg: &AttackConfig,
    seed: u64,
    parallel: bool,
) -> Result<f64> {
    check_nonempty(dataset)?;
    model.validate()?;
    cfg.validate()?;
    let n = dataset.len();
    let run = |i: usize| -> Result<bool> {
        let (x, y) = dataset.sample(i);
        let clean_logits = forward_single(model, x.data());
        if argmax(&clean_logits) != y {
            return Ok(false); // clean mistakes count as robustness failures
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[i as u64]));
        let attacked = match kind {
            AttackKind::Fgsm => fgsm(model, &x, y, cfg.epsilon)?,
            AttackKind::Pgd => {
                let path = pgd(model, &x, y, cfg, &mut rng)?;
                path.points.into_iter().last().expect("K >= 1")
            }
            AttackKind::CwPgd => cw_pgd(model, &x, y, cfg, &mut rng)?,
        };
        let adv_logits = forward_single(model, attacked.data());
        Ok(argmax(&adv_logits) == y)
    };
    let outcomes = if parallel {
        map_indexed(n, run)
    } else {
        map_indexed_seq(n, run)
    };
    let mut correct = 0usize;
    for o in outcomes {
        if o? {
            correct += 1;
        }
    }
    Ok(correct as f64 / n as f64)
}

/// Fraction of samples still classified correctly after the attack.
pub fn robust_accuracy(
    model: &MlpModel,
    dataset: &Dataset,
    kind: AttackKind,
    cfg: &AttackConfig,
    seed: u64,
) -> Result<f64> {
    robust_accuracy_impl(model, dataset, kind, cfg, seed, true)
}

/// Sequential twin of [`robust_accuracy`]; identical output.
pub fn robust_accuracy_seq(
    model: &MlpModel,
    dataset: &Dataset,
    kind: AttackKind,
    cfg: &AttackConfig,
    seed: u64,
) -> Result<f64> {
    robust_accuracy_impl(model, dataset, kind, cfg, seed, false)
}

/// Clean + FGSM + PGD + CW robust accuracy in one report.
pub fn eval_report(
    model: &MlpModel,
    dataset: &Dataset,
    cfg: &AttackConfig,
    seed: u64,
) -> Result<EvalReport> {
    let clean = clean_accuracy(model, dataset)?;
    let mut robust = Vec::new();
    for kind in [AttackKind::Fgsm, AttackKind::Pgd, AttackKind::CwPgd] {
        let acc = robust_accuracy(model, dataset, kind, cfg, seed)?;
        robust.push((kind.name().to_string(), acc));
    }
    Ok(EvalReport {
        clean_accuracy: clean,
        robust_accuracy: robust,
        n_evaluated: dataset.len(),
    })
}

fn validate_strictly_increasing(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidConfig(format!("{what}: empty sweep")));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(format!(
            "{what}: values must be strictly increasing"
        )));
    }
    Ok(())
}

/// Robust accuracy under PGD for each iteration count in `k_list`.
pub fn sweep_iterations(
    model: &MlpModel,
    dataset: &Dataset,
    epsilon: f32,
    alpha: f32,
    k_list: &[usize],
    random_start: bool,
    seed: u64,
) -> Result<SweepResult> {
    let as_f64: Vec<f64> = k_list.iter().map(|&k| k as f64).collect();
    validate_strictly_increasing(&as_f64, "iteration sweep")?;
    let mut points = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let cfg = AttackConfig::new(epsilon, alpha, k, random_start);
        let acc = robust_accuracy(model, dataset, AttackKind::Pgd, &cfg, seed)?;
        points.push((k as f64, acc));
    }
    Ok(SweepResult {
        axis: SweepAxis::PgdIterations,
        points,
    })
}

/// Robust accuracy under PGD for each budget in `eps_list`. A zero budget
/// reproduces clean accuracy exactly.
pub fn sweep_epsilon(
    model: &MlpModel,
    dataset: &Dataset,
    eps_list: &[f64],
    alpha: f32,
    iterations: usize,
    random_start: bool,
    seed: u64,
) -> Result<SweepResult> {
    validate_strictly_increasing(eps_list, "epsilon sweep")?;
    let mut points = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let cfg = AttackConfig::new(eps as f32, alpha, iterations, random_start);
        let acc = robust_accuracy(model, dataset, AttackKind::Pgd, &cfg, seed)?;
        points.push((eps, acc));
    }
    Ok(SweepResult {
        axis: SweepAxis::PgdEpsilon,
        points,
    })
}

/// Standard and robust train-minus-test accuracy gaps.
#[derive(Debug, Clone, Copy)]
pub struct GeneralizationGaps {
    pub standard_gap: f64,
    pub robust_gap: f64,
}

pub fn generalization_gaps(
    model: &MlpModel,
    train: &Dataset,
    test: &Dataset,
    cfg: &AttackConfig,
    seed: u64,
) -> Result<GeneralizationGaps> {
    let standard_gap = clean_accuracy(model, train)? - clean_accuracy(model, test)?;
    let robust_gap = robust_accuracy(model, train, AttackKind::Pgd, cfg, seed)?
        - robust_accuracy(model, test, AttackKind::Pgd, cfg, seed)?;
    Ok(GeneralizationGaps {
        standard_gap,
        robust_gap,
    })
}

/// Cross-entropy loss and attack outcome at each scale along one direction.
///
/// The direction point is fixed by `lambda` on the path's first/end segment;
/// the record at `s = 0` equals the clean loss of the benign sample exactly.
pub fn scale_probe(
    model: &MlpModel,
    x: &Tensor,
    label: usize,
    path: &AttackPath,
    lambda: f64,
    scale_grid: &[f64],
) -> Result<ScaleProbe> {
    validate_strictly_increasing(scale_grid, "scale grid")?;
    let (x_f, x_e, _) = path.first_end_points();
    let x_bar = mix_endpoints(x_f, x_e, lambda)?;
    let mut records = Vec::with_capacity(scale_grid.len());
    for &s in scale_grid {
        let (point, _) = scale_point(x, &x_bar, s)?;
        let logits = forward_single(model, point.data());
        records.push(ScaleRecord {
            scale: s,
            loss: onehot_cross_entropy_single(&logits, label),
            adversarial: argmax(&logits) != label,
        });
    }
    Ok(ScaleProbe { records })
}

/// Outcome of one gradient-masking check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    NotEvaluated,
}

#[derive(Debug, Clone)]
pub struct ObfuscationCheck {
    pub name: String,
    pub status: CheckStatus,
    pub details: String,
}

#[derive(Debug, Clone)]
pub struct ObfuscationReport {
    pub checks: Vec<ObfuscationCheck>,
}

/// Configuration of [`obfuscation_report`].
#[derive(Debug, Clone)]
pub struct ObfuscationConfig {
    /// Iterative attack for check 1 (compared against FGSM at the same budget).
    pub attack: AttackConfig,
    /// Increasing budgets for check 3.
    pub epsilons: Vec<f64>,
    /// Allowed non-monotonicity in check 3, in accuracy points (0..1 scale).
    pub tolerance: f64,
}

/// Gradient-masking sanity checks.
///
/// Check 1: the iterative attack must be at least as strong as the one-step
/// attack. Check 2 (black-box transfer) is reported as not evaluated.
/// Check 3: robust accuracy must be non-increasing in the budget, within
/// `tolerance`.
pub fn obfuscation_report(
    model: &MlpModel,
    dataset: &Dataset,
    cfg: &ObfuscationConfig,
    seed: u64,
) -> Result<ObfuscationReport> {
    let pgd_acc = robust_accuracy(model, dataset, AttackKind::Pgd, &cfg.attack, seed)?;
    let fgsm_acc = robust_accuracy(model, dataset, AttackKind::Fgsm, &cfg.attack, seed)?;
    let check1 = ObfuscationCheck {
        name: "iterative_not_weaker_than_one_step".into(),
        status: if pgd_acc <= fgsm_acc {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        details: format!("pgd_accuracy={pgd_acc:.4} fgsm_accuracy={fgsm_acc:.4}"),
    };

    let check2 = ObfuscationCheck {
        name: "black_box_not_stronger_than_white_box".into(),
        status: CheckStatus::NotEvaluated,
        details: "black-box attack out of scope".into(),
    };

    let sweep = sweep_epsilon(
        model,
        dataset,
        &cfg.epsilons,
        cfg.attack.alpha,
        cfg.attack.iterations,
        cfg.attack.random_start,
        seed,
    )?;
    let mut monotone = true;
    for w in sweep.points.windows(2) {
        if w[1].1 > w[0].1 + cfg.tolerance {
            monotone = false;
        }
    }
    let detail = sweep
        .points
        .iter()
        .map(|(e, a)| format!("{e:.3}:{a:.4}"))
        .collect::<Vec<_>>()
        .join(" ");
    let check3 = ObfuscationCheck {
        name: "accuracy_non_increasing_in_budget".into(),
        status: if monotone {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        details: detail,
    };

    Ok(ObfuscationReport {
        checks: vec![check1, check2, check3],
    })
}
