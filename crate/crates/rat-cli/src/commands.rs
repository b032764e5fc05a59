//! Subcommand implementations: train, eval, sweep, probe, gaps.
//!
//! Every command writes CSV into the output directory; `train` additionally
//! writes checkpoints, a resolved copy of the config, and a timing sidecar.
//! The metrics CSV contains only deterministic fields so reruns with the same
//! config and seed are byte-identical; wall-clock timing goes to
//! `timing.csv`, which is exempt from that guarantee.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rat_core::attacks::pgd;
use rat_core::data::{batches, gen_synthetic, load_idx, Dataset, SyntheticSpec};
use rat_core::engine::{load_checkpoint, save_checkpoint, MlpModel, SgdState};
use rat_core::eval::{
    clean_accuracy, eval_report, robust_accuracy, scale_probe, sweep_epsilon, sweep_iterations,
    AttackKind, SweepAxis,
};
use rat_core::seeding::{self, derive_seed, RunSeeds};
use rat_core::Tensor;

use crate::config::{DatasetConfig, ExperimentConfig, TrainMethod};
use crate::error::{CliError, CliResult};

/// Eval-stream subdomains, mixed on top of the run's eval seed.
mod eval_tag {
    pub const EPOCH: u64 = 1;
    pub const REPORT: u64 = 2;
    pub const SWEEP: u64 = 3;
    pub const PROBE: u64 = 4;
    pub const GAPS: u64 = 5;
}

pub struct TrainOutputs {
    pub metrics_csv: PathBuf,
    pub timing_csv: PathBuf,
    pub config_echo: PathBuf,
    pub final_checkpoint: PathBuf,
    pub best_checkpoint: PathBuf,
    pub final_model: MlpModel,
}

fn ensure_out_dir(out_dir: &Path) -> CliResult<()> {
    fs::create_dir_all(out_dir)?;
    Ok(())
}

fn build_split(cfg: &ExperimentConfig, seeds: &RunSeeds, test: bool) -> CliResult<Dataset> {
    let ds = match &cfg.dataset {
        DatasetConfig::Synthetic {
            kind,
            train_samples,
            test_samples,
            noise_std,
            n_classes,
        } => {
            let split_tag = if test { 1 } else { 0 };
            gen_synthetic(&SyntheticSpec {
                kind: *kind,
                n_samples: if test { *test_samples } else { *train_samples },
                noise_std: *noise_std,
                n_classes: *n_classes,
                seed: derive_seed(seeds.master(), &[seeding::domain::DATA, split_tag]),
            })?
        }
        DatasetConfig::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
            train_limit,
            test_limit,
        } => {
            let (images, labels, limit) = if test {
                (test_images, test_labels, test_limit)
            } else {
                (train_images, train_labels, train_limit)
            };
            let ds = load_idx(Path::new(images), Path::new(labels))?;
            match limit {
                Some(l) => ds.truncated(*l)?,
                None => ds,
            }
        }
    };
    if ds.is_empty() {
        return Err(CliError::Runtime(format!("dataset '{}' is empty", ds.name)));
    }
    if ds.num_classes > cfg.model.num_classes {
        return Err(CliError::Runtime(format!(
            "dataset '{}' has {} classes but the model is configured for {}",
            ds.name, ds.num_classes, cfg.model.num_classes
        )));
    }
    Ok(ds)
}

fn check_compatible(model: &MlpModel, dataset: &Dataset) -> CliResult<()> {
    if model.input_dim() != dataset.input_dim() {
        return Err(CliError::Runtime(format!(
            "checkpoint expects input width {} but dataset '{}' has {}",
            model.input_dim(),
            dataset.name,
            dataset.input_dim()
        )));
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents)?;
    Ok(())
}

pub fn cmd_train(cfg: &ExperimentConfig, out_dir: &Path) -> CliResult<TrainOutputs> {
    ensure_out_dir(out_dir)?;
    let seeds = RunSeeds::new(cfg.seed);
    let train_set = build_split(cfg, &seeds, false)?;
    let test_set = build_split(cfg, &seeds, true)?;

    let attack = cfg.attack_config();
    let rat_cfg = match cfg.method {
        TrainMethod::Rat => Some(cfg.rat_config()?),
        _ => None,
    };

    let mut rng = seeds.init_rng();
    let mut model = MlpModel::new_seeded(
        train_set.input_dim(),
        &cfg.model.hidden,
        cfg.model.num_classes,
        &mut rng,
    )?;
    let mut sgd = SgdState::new(
        &model,
        cfg.optimizer.learning_rate,
        cfg.optimizer.momentum,
        cfg.optimizer.weight_decay,
    )?;

    let metrics_csv = out_dir.join("metrics.csv");
    let timing_csv = out_dir.join("timing.csv");
    let config_echo = out_dir.join("config.toml");
    let final_checkpoint = out_dir.join("model-final.ckpt");
    let best_checkpoint = out_dir.join("model-best.ckpt");
    let last_checkpoint = out_dir.join("model-last.ckpt");

    write_file(&config_echo, &crate::config::emit_config(cfg))?;

    let mut metrics_rows = String::from(
        "epoch,step,method,loss,clean_acc,robust_acc_pgd,pgd_fail_frac,mean_s,mean_beta,lr\n",
    );
    let mut timing_rows = String::from("epoch,wall_ms\n");

    let mut best: Option<(f64, f64, MlpModel)> = None; // (robust, clean, snapshot)
    let mut global_step = 0u64;
    let eval_seed = seeds.eval_seed();

    for epoch in 1..=cfg.optimizer.epochs {
        if cfg.optimizer.lr_decay_epochs.contains(&epoch) {
            sgd.learning_rate /= 10.0;
        }
        let epoch_start = Instant::now();
        let mut loss_sum = 0.0f64;
        let mut fail_sum = 0.0f64;
        let mut s_sum = 0.0f64;
        let mut beta_sum = 0.0f64;
        let mut steps_in_epoch = 0usize;

        for batch in batches(
            &train_set,
            cfg.optimizer.batch_size,
            seeds.shuffle_seed(),
            (epoch - 1) as u64,
        )? {
            let metrics = match cfg.method {
                TrainMethod::St => {
                    rat_core::rat::st_train_step(&mut model, &batch.inputs, &batch.labels, &mut sgd)?
                }
                TrainMethod::Sat => rat_core::rat::sat_train_step(
                    &mut model,
                    &batch.inputs,
                    &batch.labels,
                    &attack,
                    &mut sgd,
                    &seeds,
                    global_step,
                )?,
                TrainMethod::Rat => rat_core::rat::rat_train_step(
                    &mut model,
                    &batch.inputs,
                    &batch.labels,
                    &attack,
                    rat_cfg.as_ref().expect("validated"),
                    &mut sgd,
                    &seeds,
                    global_step,
                )?,
            };
            if !metrics.loss.is_finite() {
                return Err(CliError::Runtime(format!(
                    "non-finite loss at epoch {epoch}; last good checkpoint retained at {}",
                    last_checkpoint.display()
                )));
            }
            loss_sum += metrics.loss;
            fail_sum += metrics.pgd_fail_frac;
            s_sum += metrics.mean_s;
            beta_sum += metrics.mean_beta;
            steps_in_epoch += 1;
            global_step += 1;
        }

        let epoch_eval_seed = derive_seed(eval_seed, &[eval_tag::EPOCH, epoch as u64]);
        let clean = clean_accuracy(&model, &test_set)?;
        let robust = robust_accuracy(&model, &test_set, AttackKind::Pgd, &attack, epoch_eval_seed)?;

        let k = steps_in_epoch as f64;
        metrics_rows.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            epoch,
            global_step,
            cfg.method.name(),
            loss_sum / k,
            clean,
            robust,
            fail_sum / k,
            s_sum / k,
            beta_sum / k,
            sgd.learning_rate,
        ));
        timing_rows.push_str(&format!(
            "{},{}\n",
            epoch,
            epoch_start.elapsed().as_millis()
        ));

        let better = match &best {
            None => true,
            Some((br, bc, _)) => robust > *br || (robust == *br && clean > *bc),
        };
        if better {
            best = Some((robust, clean, model.clone()));
        }
        save_checkpoint(&model, &last_checkpoint)?;
    }

    write_file(&metrics_csv, &metrics_rows)?;
    write_file(&timing_csv, &timing_rows)?;
    save_checkpoint(&model, &final_checkpoint)?;
    let (_, _, best_model) = best.expect("at least one epoch");
    save_checkpoint(&best_model, &best_checkpoint)?;

    Ok(TrainOutputs {
        metrics_csv,
        timing_csv,
        config_echo,
        final_checkpoint,
        best_checkpoint,
        final_model: model,
    })
}

pub fn cmd_eval(checkpoint: &Path, cfg: &ExperimentConfig, out_dir: &Path) -> CliResult<PathBuf> {
    ensure_out_dir(out_dir)?;
    let seeds = RunSeeds::new(cfg.seed);
    let model = load_checkpoint(checkpoint)?;
    let test_set = build_split(cfg, &seeds, true)?;
    check_compatible(&model, &test_set)?;

    let attack = cfg.attack_config();
    let seed = derive_seed(seeds.eval_seed(), &[eval_tag::REPORT]);
    let report = eval_report(&model, &test_set, &attack, seed)?;

    let mut rows = String::from("attack,epsilon,alpha,iterations,accuracy,n_evaluated\n");
    rows.push_str(&format!(
        "clean,0,0,0,{:.6},{}\n",
        report.clean_accuracy, report.n_evaluated
    ));
    for (name, acc) in &report.robust_accuracy {
        let iterations = if name == "fgsm" { 1 } else { attack.iterations };
        rows.push_str(&format!(
            "{},{},{},{},{:.6},{}\n",
            name, cfg.attack.epsilon, cfg.attack.alpha, iterations, acc, report.n_evaluated
        ));
    }
    let path = out_dir.join("eval.csv");
    write_file(&path, &rows)?;
    Ok(path)
}

pub fn cmd_sweep(
    checkpoint: &Path,
    cfg: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
    out_dir: &Path,
) -> CliResult<PathBuf> {
    ensure_out_dir(out_dir)?;
    let seeds = RunSeeds::new(cfg.seed);
    let model = load_checkpoint(checkpoint)?;
    let test_set = build_split(cfg, &seeds, true)?;
    check_compatible(&model, &test_set)?;

    let attack = cfg.attack_config();
    let seed = derive_seed(seeds.eval_seed(), &[eval_tag::SWEEP]);
    let result = match axis {
        SweepAxis::PgdIterations => {
            let mut k_list = Vec::with_capacity(values.len());
            for &v in values {
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(CliError::Runtime(format!(
                        "iteration sweep values must be positive integers, got {v}"
                    )));
                }
                k_list.push(v as usize);
            }
            sweep_iterations(
                &model,
                &test_set,
                attack.epsilon,
                attack.alpha,
                &k_list,
                attack.random_start,
                seed,
            )?
        }
        SweepAxis::PgdEpsilon => sweep_epsilon(
            &model,
            &test_set,
            values,
            attack.alpha,
            attack.iterations,
            attack.random_start,
            seed,
        )?,
    };

    let mut rows = String::from("axis,value,robust_accuracy,n_evaluated\n");
    for (value, acc) in &result.points {
        rows.push_str(&format!(
            "{},{},{:.6},{}\n",
            result.axis.name(),
            value,
            acc,
            test_set.len()
        ));
    }
    let path = out_dir.join("sweep.csv");
    write_file(&path, &rows)?;
    Ok(path)
}

pub fn cmd_probe(
    checkpoint: &Path,
    cfg: &ExperimentConfig,
    sample_index: usize,
    lambda: f64,
    out_dir: &Path,
) -> CliResult<PathBuf> {
    ensure_out_dir(out_dir)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(CliError::Runtime(format!(
            "lambda must be in [0, 1], got {lambda}"
        )));
    }
    let seeds = RunSeeds::new(cfg.seed);
    let model = load_checkpoint(checkpoint)?;
    let test_set = build_split(cfg, &seeds, true)?;
    check_compatible(&model, &test_set)?;
    if sample_index >= test_set.len() {
        return Err(CliError::Runtime(format!(
            "sample index {sample_index} out of range for {} test samples",
            test_set.len()
        )));
    }

    let (x, y) = test_set.sample(sample_index);
    let attack = cfg.attack_config();
    let probe_seed = derive_seed(seeds.eval_seed(), &[eval_tag::PROBE, sample_index as u64]);
    let mut rng = rat_core::seeding::rng_from_seed(probe_seed);
    let path_traj = pgd(&model, &x, y, &attack, &mut rng)?;

    let grid: Vec<f64> = match &cfg.rat {
        Some(rat) => rat.scale_set.clone(),
        None => (0..=20).map(|i| i as f64 * 0.1).collect(),
    };
    let probe = scale_probe(&model, &x, y, &path_traj, lambda, &grid)?;

    let mut rows = String::from("s,loss,adversarial\n");
    for r in &probe.records {
        rows.push_str(&format!("{},{:.6},{}\n", r.scale, r.loss, r.adversarial));
    }
    let path = out_dir.join("probe.csv");
    write_file(&path, &rows)?;
    Ok(path)
}

pub fn cmd_gaps(checkpoint: &Path, cfg: &ExperimentConfig, out_dir: &Path) -> CliResult<PathBuf> {
    ensure_out_dir(out_dir)?;
    let seeds = RunSeeds::new(cfg.seed);
    let model = load_checkpoint(checkpoint)?;
    let train_set = build_split(cfg, &seeds, false)?;
    let test_set = build_split(cfg, &seeds, true)?;
    check_compatible(&model, &test_set)?;

    let attack = cfg.attack_config();
    let seed = derive_seed(seeds.eval_seed(), &[eval_tag::GAPS]);
    let clean_train = clean_accuracy(&model, &train_set)?;
    let clean_test = clean_accuracy(&model, &test_set)?;
    let robust_train = robust_accuracy(&model, &train_set, AttackKind::Pgd, &attack, seed)?;
    let robust_test = robust_accuracy(&model, &test_set, AttackKind::Pgd, &attack, seed)?;

    let mut rows = String::from("metric,train_accuracy,test_accuracy,gap\n");
    rows.push_str(&format!(
        "standard,{:.6},{:.6},{:.6}\n",
        clean_train,
        clean_test,
        clean_train - clean_test
    ));
    rows.push_str(&format!(
        "robust_pgd,{:.6},{:.6},{:.6}\n",
        robust_train,
        robust_test,
        robust_train - robust_test
    ));
    let path = out_dir.join("gaps.csv");
    write_file(&path, &rows)?;
    Ok(path)
}

/// Convenience used by tests: forward a single sample through a checkpoint.
pub fn predict_sample(model: &MlpModel, x: &Tensor) -> CliResult<usize> {
    let batch = Tensor::matrix(1, x.len(), x.data().to_vec())?;
    let logits = rat_core::engine::forward(model, &batch)?;
    Ok(rat_core::engine::predict(&logits)[0])
}
