//! Scratch throughput measurement (run with --ignored); not part of the suite.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rat_core::attacks::AttackConfig;
use rat_core::engine::{MlpModel, SgdState};
use rat_core::rat::{rat_train_step, sat_train_step, RatConfig};
use rat_core::seeding::RunSeeds;
use rat_core::tensor::Tensor;
use std::time::Instant;

#[test]
#[ignore]
fn mnist_shape_step_speed() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut model = MlpModel::new_seeded(784, &[256, 128], 10, &mut rng).unwrap();
    let n = 128;
    let data: Vec<f32> = (0..n * 784).map(|_| rng.gen_range(0.0..=1.0)).collect();
    let inputs = Tensor::matrix(n, 784, data).unwrap();
    let labels: Vec<usize> = (0..n).map(|i| i % 10).collect();
    let attack = AttackConfig::new(0.1, 0.025, 10, true);
    let seeds = RunSeeds::new(3);
    let mut sgd = SgdState::new(&model, 0.1, 0.9, 2e-4).unwrap();

    // warmup
    sat_train_step(&mut model, &inputs, &labels, &attack, &mut sgd, &seeds, 0).unwrap();

    let t0 = Instant::now();
    let reps = 5;
    for step in 0..reps {
        sat_train_step(&mut model, &inputs, &labels, &attack, &mut sgd, &seeds, step).unwrap();
    }
    let sat_ms = t0.elapsed().as_millis() as f64 / reps as f64;

    let rat_cfg = RatConfig::new((0..=20).map(|i| i as f64 * 0.1).collect(), 2, 1.0, 0.1).unwrap();
    let t0 = Instant::now();
    for step in 0..reps {
        rat_train_step(&mut model, &inputs, &labels, &attack, &rat_cfg, &mut sgd, &seeds, step).unwrap();
    }
    let rat_ms = t0.elapsed().as_millis() as f64 / reps as f64;

    println!("sat step: {sat_ms:.0} ms, rat step: {rat_ms:.0} ms, overhead {:.1}%", (rat_ms / sat_ms - 1.0) * 100.0);
    println!("projected SAT 10 epochs x 79 steps: {:.1} min", sat_ms * 790.0 / 60000.0);
}
