//! Parallel vs sequential comparison of the batch hot paths.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rat_core::attacks::{pgd_batch, pgd_batch_seq, AttackConfig};
use rat_core::engine::{backward, backward_seq, MlpModel};
use rat_core::eval::{robust_accuracy, robust_accuracy_seq, AttackKind};
use rat_core::data::{gen_synthetic, SyntheticKind, SyntheticSpec};
use rat_core::tensor::Tensor;

fn fixture_model(input_dim: usize, hidden: &[usize], classes: usize) -> MlpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    MlpModel::new_seeded(input_dim, hidden, classes, &mut rng).unwrap()
}

fn fixture_batch(n: usize, d: usize, c: usize) -> (Tensor, Vec<usize>, Tensor) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let data: Vec<f32> = (0..n * d).map(|_| rng.gen_range(0.0..=1.0)).collect();
    let labels: Vec<usize> = (0..n).map(|i| i % c).collect();
    let mut targets = vec![0.0f32; n * c];
    for (r, &y) in labels.iter().enumerate() {
        targets[r * c + y] = 1.0;
    }
    (
        Tensor::matrix(n, d, data).unwrap(),
        labels,
        Tensor::matrix(n, c, targets).unwrap(),
    )
}

fn bench_pgd_batch(c: &mut Criterion) {
    let model = fixture_model(64, &[64, 32], 10);
    let (inputs, labels, _) = fixture_batch(64, 64, 10);
    let seeds: Vec<u64> = (0..64).collect();
    let cfg = AttackConfig::new(0.1, 0.025, 10, true);

    let mut group = c.benchmark_group("pgd_batch_64x64_k10");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("parallel", ""), |b| {
        b.iter(|| pgd_batch(&model, &inputs, &labels, &cfg, &seeds).unwrap())
    });
    group.bench_function(BenchmarkId::new("sequential", ""), |b| {
        b.iter(|| pgd_batch_seq(&model, &inputs, &labels, &cfg, &seeds).unwrap())
    });
    group.finish();
}

fn bench_backward(c: &mut Criterion) {
    let model = fixture_model(256, &[128, 64], 10);
    let (inputs, _, targets) = fixture_batch(256, 256, 10);

    let mut group = c.benchmark_group("backward_256x256");
    group.sample_size(20);
    group.bench_function(BenchmarkId::new("parallel", ""), |b| {
        b.iter(|| backward(&model, &inputs, &targets).unwrap())
    });
    group.bench_function(BenchmarkId::new("sequential", ""), |b| {
        b.iter(|| backward_seq(&model, &inputs, &targets).unwrap())
    });
    group.finish();
}

fn bench_robust_accuracy(c: &mut Criterion) {
    let dataset = gen_synthetic(&SyntheticSpec {
        kind: SyntheticKind::TwoMoons,
        n_samples: 128,
        noise_std: 0.08,
        n_classes: 2,
        seed: 3,
    })
    .unwrap();
    let model = fixture_model(2, &[64, 64], 2);
    let cfg = AttackConfig::new(0.1, 0.025, 10, true);

    let mut group = c.benchmark_group("robust_accuracy_moons_128");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("parallel", ""), |b| {
        b.iter(|| robust_accuracy(&model, &dataset, AttackKind::Pgd, &cfg, 5).unwrap())
    });
    group.bench_function(BenchmarkId::new("sequential", ""), |b| {
        b.iter(|| robust_accuracy_seq(&model, &dataset, AttackKind::Pgd, &cfg, 5).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_pgd_batch, bench_backward, bench_robust_accuracy);
criterion_main!(benches);
