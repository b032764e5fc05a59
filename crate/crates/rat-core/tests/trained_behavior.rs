//! Seeded end-to-end behavior of trained models: attack-strength ordering,
//! sweep monotonicity, probe trends, and generalization gaps.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rat_core::attacks::{pgd, AttackConfig};
use rat_core::data::{batches, gen_synthetic, Dataset, SyntheticKind, SyntheticSpec};
use rat_core::engine::{MlpModel, SgdState};
use rat_core::eval::{
    clean_accuracy, generalization_gaps, obfuscation_report, robust_accuracy, scale_probe,
    sweep_epsilon, sweep_iterations, AttackKind, CheckStatus, ObfuscationConfig,
};
use rat_core::rat::{sat_train_step, st_train_step};
use rat_core::seeding::RunSeeds;

fn moons(n: usize, seed: u64) -> Dataset {
    gen_synthetic(&SyntheticSpec {
        kind: SyntheticKind::TwoMoons,
        n_samples: n,
        noise_std: 0.08,
        n_classes: 2,
        seed,
    })
    .unwrap()
}

enum Method {
    St,
    Sat,
}

fn train_moons(method: Method, epochs: usize, master_seed: u64) -> (MlpModel, Dataset, Dataset) {
    let train = moons(200, 1000 + master_seed);
    let test = moons(200, 2000 + master_seed);
    let seeds = RunSeeds::new(master_seed);
    let mut rng = seeds.init_rng();
    let mut model = MlpModel::new_seeded(2, &[32, 32], 2, &mut rng).unwrap();
    let mut sgd = SgdState::new(&model, 0.1, 0.9, 2e-4).unwrap();
    let attack = AttackConfig::new(0.1, 0.025, 5, true);
    let mut step = 0u64;
    for epoch in 0..epochs {
        for batch in batches(&train, 64, seeds.shuffle_seed(), epoch as u64).unwrap() {
            match method {
                Method::St => {
                    st_train_step(&mut model, &batch.inputs, &batch.labels, &mut sgd).unwrap();
                }
                Method::Sat => {
                    sat_train_step(
                        &mut model,
                        &batch.inputs,
                        &batch.labels,
                        &attack,
                        &mut sgd,
                        &seeds,
                        step,
                    )
                    .unwrap();
                }
            }
            step += 1;
        }
    }
    (model, train, test)
}

#[test]
fn iterative_attack_is_at_least_as_strong_as_one_step() {
    let (model, _, test) = train_moons(Method::Sat, 30, 5);
    let cfg = AttackConfig::new(0.1, 0.025, 10, true);
    let pgd_acc = robust_accuracy(&model, &test, AttackKind::Pgd, &cfg, 3).unwrap();
    let fgsm_acc = robust_accuracy(&model, &test, AttackKind::Fgsm, &cfg, 3).unwrap();
    assert!(
        pgd_acc <= fgsm_acc + 1e-9,
        "pgd {pgd_acc} should not beat fgsm {fgsm_acc}"
    );
}

#[test]
fn more_iterations_do_not_help_the_defender() {
    let (model, _, test) = train_moons(Method::Sat, 30, 6);
    let sweep = sweep_iterations(&model, &test, 0.1, 0.025, &[1, 10, 100], true, 4).unwrap();
    assert_eq!(sweep.points.len(), 3);
    let at_1 = sweep.points[0].1;
    let at_100 = sweep.points[2].1;
    assert!(
        at_100 <= at_1 + 0.02,
        "accuracy rose with iterations: K=1 {at_1}, K=100 {at_100}"
    );
}

#[test]
fn accuracy_is_non_increasing_in_the_budget() {
    let (model, _, test) = train_moons(Method::Sat, 30, 7);
    let sweep = sweep_epsilon(&model, &test, &[0.0, 0.05, 0.1, 0.15, 0.2], 0.025, 10, true, 4)
        .unwrap();
    for w in sweep.points.windows(2) {
        assert!(
            w[1].1 <= w[0].1 + 0.01,
            "budget {} -> {}: accuracy rose {} -> {}",
            w[0].0,
            w[1].0,
            w[0].1,
            w[1].1
        );
    }
}

#[test]
fn probe_loss_grows_along_the_sampled_direction() {
    let (model, _, test) = train_moons(Method::Sat, 30, 8);
    let attack = AttackConfig::new(0.1, 0.025, 10, true);
    let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();

    // Probe the first few correctly classified test points.
    let mut checked = 0;
    let mut grew = 0;
    for i in 0..test.len() {
        if checked >= 20 {
            break;
        }
        let (x, y) = test.sample(i);
        let logits = rat_core::engine::forward(
            &model,
            &rat_core::Tensor::matrix(1, 2, x.data().to_vec()).unwrap(),
        )
        .unwrap();
        if rat_core::engine::predict(&logits)[0] != y {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(40 + i as u64);
        let path = pgd(&model, &x, y, &attack, &mut rng).unwrap();
        let probe = scale_probe(&model, &x, y, &path, 0.5, &grid).unwrap();
        assert_eq!(probe.records.len(), 21);
        checked += 1;
        if probe.records[20].loss >= probe.records[0].loss {
            grew += 1;
        }
    }
    assert!(checked >= 10, "not enough correctly classified points");
    assert!(
        grew * 10 >= checked * 7,
        "loss grew on only {grew} of {checked} probes"
    );
}

#[test]
fn st_overfits_with_nonnegative_standard_gap() {
    let (model, train, test) = train_moons(Method::St, 40, 9);
    let cfg = AttackConfig::new(0.1, 0.025, 10, true);
    let gaps = generalization_gaps(&model, &train, &test, &cfg, 6).unwrap();
    assert!((-1.0..=1.0).contains(&gaps.standard_gap));
    assert!((-1.0..=1.0).contains(&gaps.robust_gap));
    assert!(
        gaps.standard_gap >= -0.02,
        "converged ST should not generalize better than it fits: {}",
        gaps.standard_gap
    );
    let train_acc = clean_accuracy(&model, &train).unwrap();
    assert!(train_acc > 0.95, "ST failed to fit: {train_acc}");
}

#[test]
fn obfuscation_checks_pass_on_a_robust_model() {
    let (model, _, test) = train_moons(Method::Sat, 30, 10);
    let report = obfuscation_report(
        &model,
        &test,
        &ObfuscationConfig {
            attack: AttackConfig::new(0.1, 0.025, 20, true),
            epsilons: vec![0.0, 0.05, 0.1, 0.15, 0.2],
            tolerance: 0.01,
        },
        11,
    )
    .unwrap();
    assert_eq!(report.checks.len(), 3);
    assert_eq!(report.checks[0].status, CheckStatus::Pass, "{:?}", report.checks[0]);
    assert_eq!(report.checks[1].status, CheckStatus::NotEvaluated);
    assert_eq!(report.checks[2].status, CheckStatus::Pass, "{:?}", report.checks[2]);
}
