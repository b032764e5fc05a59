//! Declarative experiment configuration.
//!
//! TOML with fixed sections; unknown keys are rejected and validation
//! collects every problem instead of stopping at the first. The exact schema
//! is documented in the repository README.

use std::path::Path;

use rat_core::data::SyntheticKind;
use rat_core::rat::RatConfig;
use toml::value::Table;
use toml::Value;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMethod {
    St,
    Sat,
    Rat,
}

impl TrainMethod {
    pub fn name(&self) -> &'static str {
        match self {
            TrainMethod::St => "st",
            TrainMethod::Sat => "sat",
            TrainMethod::Rat => "rat",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetConfig {
    Synthetic {
        kind: SyntheticKind,
        train_samples: usize,
        test_samples: usize,
        noise_std: f64,
        n_classes: usize,
    },
    Idx {
        train_images: String,
        train_labels: String,
        test_images: String,
        test_labels: String,
        train_limit: Option<usize>,
        test_limit: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub num_classes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Epochs (1-based) at whose start the learning rate is divided by 10.
    pub lr_decay_epochs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackSection {
    pub epsilon: f64,
    pub alpha: f64,
    pub iterations: usize,
    pub random_start: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatSection {
    pub scale_set: Vec<f64>,
    pub samples_per_point: usize,
    pub beta_max: f64,
    pub beta_min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub method: TrainMethod,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub optimizer: OptimizerConfig,
    pub attack: AttackSection,
    pub rat: Option<RatSection>,
}

impl ExperimentConfig {
    /// Attack config in engine units.
    pub fn attack_config(&self) -> rat_core::attacks::AttackConfig {
        rat_core::attacks::AttackConfig::new(
            self.attack.epsilon as f32,
            self.attack.alpha as f32,
            self.attack.iterations,
            self.attack.random_start,
        )
    }

    /// Validated sampler config; only meaningful when `method == Rat`.
    pub fn rat_config(&self) -> CliResult<RatConfig> {
        let section = self.rat.as_ref().ok_or_else(|| {
            CliError::Config(vec!["rat: section required when method = \"rat\"".into()])
        })?;
        RatConfig::new(
            section.scale_set.clone(),
            section.samples_per_point,
            section.beta_max,
            section.beta_min,
        )
        .map_err(|e| CliError::Config(vec![format!("rat: {e}")]))
    }
}

struct Ctx {
    errors: Vec<String>,
}

impl Ctx {
    fn new() -> Self {
        Self { errors: Vec::new() }
    }

    fn err(&mut self, msg: impl Into<String>) {
        self.errors.push(msg.into());
    }

    fn check_keys(&mut self, table: &Table, path: &str, allowed: &[&str]) {
        for key in table.keys() {
            if !allowed.contains(&key.as_str()) {
                self.err(format!("{path}{key}: unknown key"));
            }
        }
    }

    fn req_table<'a>(&mut self, root: &'a Table, name: &str) -> Option<&'a Table> {
        match root.get(name) {
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                self.err(format!("{name}: expected a table"));
                None
            }
            None => {
                self.err(format!("{name}: missing required section"));
                None
            }
        }
    }

    fn req_f64(&mut self, t: &Table, path: &str, key: &str) -> Option<f64> {
        match t.get(key) {
            Some(Value::Float(f)) => Some(*f),
            Some(Value::Integer(i)) => Some(*i as f64),
            Some(_) => {
                self.err(format!("{path}{key}: expected a number"));
                None
            }
            None => {
                self.err(format!("{path}{key}: missing required key"));
                None
            }
        }
    }

    fn req_usize(&mut self, t: &Table, path: &str, key: &str, min: usize) -> Option<usize> {
        match t.get(key) {
            Some(Value::Integer(i)) if *i >= min as i64 => Some(*i as usize),
            Some(Value::Integer(i)) => {
                self.err(format!("{path}{key}: must be >= {min}, got {i}"));
                None
            }
            Some(_) => {
                self.err(format!("{path}{key}: expected an integer"));
                None
            }
            None => {
                self.err(format!("{path}{key}: missing required key"));
                None
            }
        }
    }

    fn opt_usize(&mut self, t: &Table, path: &str, key: &str, min: usize) -> Option<usize> {
        if t.contains_key(key) {
            self.req_usize(t, path, key, min)
        } else {
            None
        }
    }

    fn req_u64(&mut self, t: &Table, path: &str, key: &str) -> Option<u64> {
        match t.get(key) {
            Some(Value::Integer(i)) if *i >= 0 => Some(*i as u64),
            Some(Value::Integer(i)) => {
                self.err(format!("{path}{key}: must be nonnegative, got {i}"));
                None
            }
            Some(_) => {
                self.err(format!("{path}{key}: expected an integer"));
                None
            }
            None => {
                self.err(format!("{path}{key}: missing required key"));
                None
            }
        }
    }

    fn req_bool(&mut self, t: &Table, path: &str, key: &str) -> Option<bool> {
        match t.get(key) {
            Some(Value::Boolean(b)) => Some(*b),
            Some(_) => {
                self.err(format!("{path}{key}: expected a boolean"));
                None
            }
            None => {
                self.err(format!("{path}{key}: missing required key"));
                None
            }
        }
    }

    fn req_string(&mut self, t: &Table, path: &str, key: &str) -> Option<String> {
        match t.get(key) {
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.err(format!("{path}{key}: expected a string"));
                None
            }
            None => {
                self.err(format!("{path}{key}: missing required key"));
                None
            }
        }
    }

    fn opt_usize_array(&mut self, t: &Table, path: &str, key: &str) -> Option<Vec<usize>> {
        match t.get(key) {
            Some(Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                for (i, v) in items.iter().enumerate() {
                    match v {
                        Value::Integer(n) if *n >= 0 => out.push(*n as usize),
                        _ => {
                            self.err(format!("{path}{key}[{i}]: expected a nonnegative integer"));
                            return None;
                        }
                    }
                }
                Some(out)
            }
            Some(_) => {
                self.err(format!("{path}{key}: expected an array of integers"));
                None
            }
            None => None,
        }
    }

    fn opt_f64_array(&mut self, t: &Table, path: &str, key: &str) -> Option<Vec<f64>> {
        match t.get(key) {
            Some(Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                for (i, v) in items.iter().enumerate() {
                    match v {
                        Value::Float(f) => out.push(*f),
                        Value::Integer(n) => out.push(*n as f64),
                        _ => {
                            self.err(format!("{path}{key}[{i}]: expected a number"));
                            return None;
                        }
                    }
                }
                Some(out)
            }
            Some(_) => {
                self.err(format!("{path}{key}: expected an array of numbers"));
                None
            }
            None => None,
        }
    }
}

fn parse_dataset(ctx: &mut Ctx, t: &Table) -> Option<DatasetConfig> {
    ctx.check_keys(
        t,
        "dataset.",
        &[
            "kind",
            "train_samples",
            "test_samples",
            "noise_std",
            "n_classes",
            "train_images",
            "train_labels",
            "test_images",
            "test_labels",
            "train_limit",
            "test_limit",
        ],
    );
    let kind = ctx.req_string(t, "dataset.", "kind")?;
    match kind.as_str() {
        "two_moons" | "gaussian_blobs" => {
            let synthetic_kind = if kind == "two_moons" {
                SyntheticKind::TwoMoons
            } else {
                SyntheticKind::GaussianBlobs
            };
            let train_samples = ctx.req_usize(t, "dataset.", "train_samples", 1);
            let test_samples = ctx.req_usize(t, "dataset.", "test_samples", 1);
            let noise_std = ctx.req_f64(t, "dataset.", "noise_std");
            if let Some(v) = noise_std {
                if v < 0.0 {
                    ctx.err(format!("dataset.noise_std: must be >= 0, got {v}"));
                }
            }
            let n_classes = match synthetic_kind {
                SyntheticKind::TwoMoons => {
                    if let Some(c) = ctx.opt_usize(t, "dataset.", "n_classes", 2) {
                        if c != 2 {
                            ctx.err(format!(
                                "dataset.n_classes: two_moons is binary, got {c}"
                            ));
                        }
                    }
                    2
                }
                SyntheticKind::GaussianBlobs => ctx.req_usize(t, "dataset.", "n_classes", 2)?,
            };
            for key in ["train_images", "train_labels", "test_images", "test_labels"] {
                if t.contains_key(key) {
                    ctx.err(format!("dataset.{key}: only valid for kind = \"idx\""));
                }
            }
            Some(DatasetConfig::Synthetic {
                kind: synthetic_kind,
                train_samples: train_samples?,
                test_samples: test_samples?,
                noise_std: noise_std?,
                n_classes,
            })
        }
        "idx" => {
            for key in ["train_samples", "test_samples", "noise_std", "n_classes"] {
                if t.contains_key(key) {
                    ctx.err(format!("dataset.{key}: only valid for synthetic kinds"));
                }
            }
            Some(DatasetConfig::Idx {
                train_images: ctx.req_string(t, "dataset.", "train_images")?,
                train_labels: ctx.req_string(t, "dataset.", "train_labels")?,
                test_images: ctx.req_string(t, "dataset.", "test_images")?,
                test_labels: ctx.req_string(t, "dataset.", "test_labels")?,
                train_limit: ctx.opt_usize(t, "dataset.", "train_limit", 1),
                test_limit: ctx.opt_usize(t, "dataset.", "test_limit", 1),
            })
        }
        other => {
            ctx.err(format!(
                "dataset.kind: expected two_moons | gaussian_blobs | idx, got \"{other}\""
            ));
            None
        }
    }
}

fn parse_model(ctx: &mut Ctx, t: &Table) -> Option<ModelConfig> {
    ctx.check_keys(t, "model.", &["hidden", "num_classes"]);
    let hidden = match ctx.opt_usize_array(t, "model.", "hidden") {
        Some(h) => {
            if h.iter().any(|&w| w == 0) {
                ctx.err("model.hidden: widths must be positive".to_string());
            }
            Some(h)
        }
        None => {
            if !t.contains_key("hidden") {
                ctx.err("model.hidden: missing required key".to_string());
            }
            None
        }
    };
    let num_classes = ctx.req_usize(t, "model.", "num_classes", 2);
    Some(ModelConfig {
        hidden: hidden?,
        num_classes: num_classes?,
    })
}

fn parse_optimizer(ctx: &mut Ctx, t: &Table) -> Option<OptimizerConfig> {
    ctx.check_keys(
        t,
        "optimizer.",
        &[
            "learning_rate",
            "momentum",
            "weight_decay",
            "epochs",
            "batch_size",
            "lr_decay_epochs",
        ],
    );
    let lr = ctx.req_f64(t, "optimizer.", "learning_rate");
    if let Some(v) = lr {
        if v <= 0.0 {
            ctx.err(format!("optimizer.learning_rate: must be > 0, got {v}"));
        }
    }
    let momentum = ctx.req_f64(t, "optimizer.", "momentum");
    if let Some(v) = momentum {
        if !(0.0..1.0).contains(&v) {
            ctx.err(format!("optimizer.momentum: must be in [0, 1), got {v}"));
        }
    }
    let weight_decay = ctx.req_f64(t, "optimizer.", "weight_decay");
    if let Some(v) = weight_decay {
        if v < 0.0 {
            ctx.err(format!("optimizer.weight_decay: must be >= 0, got {v}"));
        }
    }
    let epochs = ctx.req_usize(t, "optimizer.", "epochs", 1);
    let batch_size = ctx.req_usize(t, "optimizer.", "batch_size", 1);

    let lr_decay_epochs = match (ctx.opt_usize_array(t, "optimizer.", "lr_decay_epochs"), epochs) {
        (Some(list), Some(total)) => {
            if list.windows(2).any(|w| w[0] >= w[1]) {
                ctx.err("optimizer.lr_decay_epochs: must be strictly increasing".to_string());
            }
            if list.iter().any(|&e| e == 0 || e >= total) {
                ctx.err(format!(
                    "optimizer.lr_decay_epochs: entries must be in [1, {})",
                    total
                ));
            }
            Some(list)
        }
        (Some(list), None) => Some(list),
        // Default two-drop shape: decay at 50% and 75% of the run.
        (None, Some(total)) => {
            let mut defaults = vec![total / 2, total * 3 / 4];
            defaults.dedup();
            defaults.retain(|&e| e >= 1 && e < total);
            Some(defaults)
        }
        (None, None) => None,
    };

    Some(OptimizerConfig {
        learning_rate: lr?,
        momentum: momentum?,
        weight_decay: weight_decay?,
        epochs: epochs?,
        batch_size: batch_size?,
        lr_decay_epochs: lr_decay_epochs?,
    })
}

fn parse_attack(ctx: &mut Ctx, t: &Table) -> Option<AttackSection> {
    ctx.check_keys(
        t,
        "attack.",
        &["epsilon", "alpha", "iterations", "random_start"],
    );
    let epsilon = ctx.req_f64(t, "attack.", "epsilon");
    if let Some(v) = epsilon {
        if v < 0.0 {
            ctx.err(format!("attack.epsilon: must be >= 0, got {v}"));
        }
    }
    let alpha = ctx.req_f64(t, "attack.", "alpha");
    if let Some(v) = alpha {
        if v <= 0.0 {
            ctx.err(format!("attack.alpha: must be > 0, got {v}"));
        }
    }
    let iterations = ctx.req_usize(t, "attack.", "iterations", 1);
    let random_start = ctx.req_bool(t, "attack.", "random_start");
    Some(AttackSection {
        epsilon: epsilon?,
        alpha: alpha?,
        iterations: iterations?,
        random_start: random_start?,
    })
}

fn parse_rat(ctx: &mut Ctx, t: &Table) -> Option<RatSection> {
    ctx.check_keys(
        t,
        "rat.",
        &[
            "scale_set",
            "scale_start",
            "scale_stop",
            "scale_step",
            "samples",
            "beta_max",
            "beta_min",
        ],
    );
    let explicit = ctx.opt_f64_array(t, "rat.", "scale_set");
    let has_grid =
        t.contains_key("scale_start") || t.contains_key("scale_stop") || t.contains_key("scale_step");
    let scale_set = match (explicit, has_grid) {
        (Some(_), true) => {
            ctx.err("rat: give either scale_set or a scale_start/stop/step grid, not both");
            None
        }
        (Some(set), false) => Some(set),
        (None, true) => {
            let start = ctx.req_f64(t, "rat.", "scale_start");
            let stop = ctx.req_f64(t, "rat.", "scale_stop");
            let step = ctx.req_f64(t, "rat.", "scale_step");
            match (start, stop, step) {
                (Some(start), Some(stop), Some(step)) => resolve_grid(ctx, start, stop, step),
                _ => None,
            }
        }
        (None, false) => {
            if t.contains_key("scale_set") {
                None // malformed array already reported
            } else {
                ctx.err("rat: missing scale_set or scale_start/stop/step grid");
                None
            }
        }
    };
    let samples = ctx.req_usize(t, "rat.", "samples", 1);
    let beta_max = ctx.req_f64(t, "rat.", "beta_max");
    let beta_min = ctx.req_f64(t, "rat.", "beta_min");
    if let (Some(bmax), Some(bmin)) = (beta_max, beta_min) {
        if bmin > bmax {
            ctx.err(format!(
                "rat.beta_min ({bmin}) must not exceed rat.beta_max ({bmax})"
            ));
        }
    }
    let section = RatSection {
        scale_set: scale_set?,
        samples_per_point: samples?,
        beta_max: beta_max?,
        beta_min: beta_min?,
    };
    // Surface the sampler's own validation (ordering, ranges) as config errors.
    if let Err(e) = RatConfig::new(
        section.scale_set.clone(),
        section.samples_per_point,
        section.beta_max,
        section.beta_min,
    ) {
        ctx.err(format!("rat: {e}"));
        return None;
    }
    Some(section)
}

/// Expands an inclusive `start..=stop` grid with spacing `step`.
fn resolve_grid(ctx: &mut Ctx, start: f64, stop: f64, step: f64) -> Option<Vec<f64>> {
    if step <= 0.0 {
        ctx.err(format!("rat.scale_step: must be > 0, got {step}"));
        return None;
    }
    if stop < start {
        ctx.err(format!(
            "rat.scale_stop: must be >= scale_start, got {stop} < {start}"
        ));
        return None;
    }
    let count = ((stop - start) / step).round() as usize;
    if ((start + count as f64 * step) - stop).abs() > 1e-9 {
        ctx.err(format!(
            "rat scale grid: step {step} does not evenly divide [{start}, {stop}]"
        ));
        return None;
    }
    Some((0..=count).map(|i| start + i as f64 * step).collect())
}

pub fn parse_config_str(text: &str) -> CliResult<ExperimentConfig> {
    let value: Value = text
        .parse()
        .map_err(|e| CliError::Config(vec![format!("TOML parse error: {e}")]))?;
    let root = match value {
        Value::Table(t) => t,
        _ => return Err(CliError::Config(vec!["top level must be a table".into()])),
    };

    let mut ctx = Ctx::new();
    ctx.check_keys(
        &root,
        "",
        &["seed", "method", "dataset", "model", "optimizer", "attack", "rat"],
    );

    let seed = ctx.req_u64(&root, "", "seed");
    let method = match ctx.req_string(&root, "", "method") {
        Some(m) => match m.as_str() {
            "st" => Some(TrainMethod::St),
            "sat" => Some(TrainMethod::Sat),
            "rat" => Some(TrainMethod::Rat),
            other => {
                ctx.err(format!("method: expected st | sat | rat, got \"{other}\""));
                None
            }
        },
        None => None,
    };

    let dataset = ctx.req_table(&root, "dataset").and_then(|t| {
        let t = t.clone();
        parse_dataset(&mut ctx, &t)
    });
    let model = ctx.req_table(&root, "model").and_then(|t| {
        let t = t.clone();
        parse_model(&mut ctx, &t)
    });
    let optimizer = ctx.req_table(&root, "optimizer").and_then(|t| {
        let t = t.clone();
        parse_optimizer(&mut ctx, &t)
    });
    let attack = ctx.req_table(&root, "attack").and_then(|t| {
        let t = t.clone();
        parse_attack(&mut ctx, &t)
    });

    let rat = match root.get("rat") {
        Some(Value::Table(t)) => {
            let t = t.clone();
            parse_rat(&mut ctx, &t)
        }
        Some(_) => {
            ctx.err("rat: expected a table".to_string());
            None
        }
        None => None,
    };
    if method == Some(TrainMethod::Rat) && !root.contains_key("rat") {
        ctx.err("rat: section required when method = \"rat\"".to_string());
    }

    // Cross-section checks that need several parsed parts.
    if let (Some(DatasetConfig::Synthetic { n_classes, .. }), Some(m)) = (&dataset, &model) {
        if *n_classes != m.num_classes {
            ctx.err(format!(
                "model.num_classes ({}) must match dataset classes ({})",
                m.num_classes, n_classes
            ));
        }
    }

    if !ctx.errors.is_empty() {
        return Err(CliError::Config(ctx.errors));
    }
    Ok(ExperimentConfig {
        seed: seed.expect("validated"),
        method: method.expect("validated"),
        dataset: dataset.expect("validated"),
        model: model.expect("validated"),
        optimizer: optimizer.expect("validated"),
        attack: attack.expect("validated"),
        rat,
    })
}

pub fn parse_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))?;
    parse_config_str(&text)
}

fn toml_string(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn toml_float(v: f64) -> String {
    // Keep a decimal point so the value re-parses as a float.
    let s = format!("{v}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("nan") {
        s
    } else {
        format!("{s}.0")
    }
}

/// Serializes the resolved config; the output re-parses to an equal value.
pub fn emit_config(cfg: &ExperimentConfig) -> String {
    let mut out = String::new();
    out.push_str(&format!("seed = {}\n", cfg.seed));
    out.push_str(&format!("method = \"{}\"\n\n", cfg.method.name()));

    out.push_str("[dataset]\n");
    match &cfg.dataset {
        DatasetConfig::Synthetic {
            kind,
            train_samples,
            test_samples,
            noise_std,
            n_classes,
        } => {
            let kind_name = match kind {
                SyntheticKind::TwoMoons => "two_moons",
                SyntheticKind::GaussianBlobs => "gaussian_blobs",
            };
            out.push_str(&format!("kind = \"{kind_name}\"\n"));
            out.push_str(&format!("train_samples = {train_samples}\n"));
            out.push_str(&format!("test_samples = {test_samples}\n"));
            out.push_str(&format!("noise_std = {}\n", toml_float(*noise_std)));
            if *kind == SyntheticKind::GaussianBlobs {
                out.push_str(&format!("n_classes = {n_classes}\n"));
            }
        }
        DatasetConfig::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
            train_limit,
            test_limit,
        } => {
            out.push_str("kind = \"idx\"\n");
            out.push_str(&format!("train_images = {}\n", toml_string(train_images)));
            out.push_str(&format!("train_labels = {}\n", toml_string(train_labels)));
            out.push_str(&format!("test_images = {}\n", toml_string(test_images)));
            out.push_str(&format!("test_labels = {}\n", toml_string(test_labels)));
            if let Some(l) = train_limit {
                out.push_str(&format!("train_limit = {l}\n"));
            }
            if let Some(l) = test_limit {
                out.push_str(&format!("test_limit = {l}\n"));
            }
        }
    }

    out.push_str("\n[model]\n");
    let widths: Vec<String> = cfg.model.hidden.iter().map(|w| w.to_string()).collect();
    out.push_str(&format!("hidden = [{}]\n", widths.join(", ")));
    out.push_str(&format!("num_classes = {}\n", cfg.model.num_classes));

    out.push_str("\n[optimizer]\n");
    out.push_str(&format!(
        "learning_rate = {}\n",
        toml_float(cfg.optimizer.learning_rate)
    ));
    out.push_str(&format!("momentum = {}\n", toml_float(cfg.optimizer.momentum)));
    out.push_str(&format!(
        "weight_decay = {}\n",
        toml_float(cfg.optimizer.weight_decay)
    ));
    out.push_str(&format!("epochs = {}\n", cfg.optimizer.epochs));
    out.push_str(&format!("batch_size = {}\n", cfg.optimizer.batch_size));
    let decays: Vec<String> = cfg
        .optimizer
        .lr_decay_epochs
        .iter()
        .map(|e| e.to_string())
        .collect();
    out.push_str(&format!("lr_decay_epochs = [{}]\n", decays.join(", ")));

    out.push_str("\n[attack]\n");
    out.push_str(&format!("epsilon = {}\n", toml_float(cfg.attack.epsilon)));
    out.push_str(&format!("alpha = {}\n", toml_float(cfg.attack.alpha)));
    out.push_str(&format!("iterations = {}\n", cfg.attack.iterations));
    out.push_str(&format!("random_start = {}\n", cfg.attack.random_start));

    if let Some(rat) = &cfg.rat {
        out.push_str("\n[rat]\n");
        let scales: Vec<String> = rat.scale_set.iter().map(|s| toml_float(*s)).collect();
        out.push_str(&format!("scale_set = [{}]\n", scales.join(", ")));
        out.push_str(&format!("samples = {}\n", rat.samples_per_point));
        out.push_str(&format!("beta_max = {}\n", toml_float(rat.beta_max)));
        out.push_str(&format!("beta_min = {}\n", toml_float(rat.beta_min)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const VALID: &str = r#"
seed = 42
method = "rat"

[dataset]
kind = "two_moons"
train_samples = 400
test_samples = 400
noise_std = 0.1

[model]
hidden = [64, 64]
num_classes = 2

[optimizer]
learning_rate = 0.1
momentum = 0.9
weight_decay = 0.0002
epochs = 100
batch_size = 64

[attack]
epsilon = 0.1
alpha = 0.025
iterations = 10
random_start = true

[rat]
scale_start = 0.0
scale_stop = 2.0
scale_step = 0.1
samples = 2
beta_max = 1.0
beta_min = 0.1
"#;

    #[test]
    fn paper_default_grid_resolves_to_21_scales() {
        let cfg = parse_config_str(VALID).unwrap();
        let rat = cfg.rat.unwrap();
        assert_eq!(rat.scale_set.len(), 21);
        assert_eq!(rat.scale_set[0], 0.0);
        assert!((rat.scale_set[20] - 2.0).abs() < 1e-12);
        assert!((rat.scale_set[13] - 1.3).abs() < 1e-9);
        assert_eq!(cfg.optimizer.lr_decay_epochs, vec![50, 75]);
    }

    #[test]
    fn sat_without_rat_section_is_valid() {
        let text = VALID
            .replace("method = \"rat\"", "method = \"sat\"")
            .split("[rat]")
            .next()
            .unwrap()
            .to_string();
        let cfg = parse_config_str(&text).unwrap();
        assert_eq!(cfg.method, TrainMethod::Sat);
        assert!(cfg.rat.is_none());
    }

    #[test]
    fn rat_method_without_rat_section_is_invalid() {
        let text = VALID.split("[rat]").next().unwrap().to_string();
        let err = parse_config_str(&text).unwrap_err();
        match err {
            CliError::Config(msgs) => {
                assert!(msgs.iter().any(|m| m.contains("rat: section required")))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn beta_order_violation_names_both_fields() {
        let text = VALID
            .replace("beta_max = 1.0", "beta_max = 0.3")
            .replace("beta_min = 0.1", "beta_min = 0.8");
        let err = parse_config_str(&text).unwrap_err();
        match err {
            CliError::Config(msgs) => {
                assert!(
                    msgs.iter()
                        .any(|m| m.contains("beta_min") && m.contains("beta_max")),
                    "{msgs:?}"
                );
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected_and_errors_accumulate() {
        let text = VALID
            .replace("seed = 42", "seed = 42\ntypo_key = 1")
            .replace("epsilon = 0.1", "epsilon = -0.5");
        let err = parse_config_str(&text).unwrap_err();
        match err {
            CliError::Config(msgs) => {
                assert!(msgs.iter().any(|m| m.contains("typo_key")), "{msgs:?}");
                assert!(msgs.iter().any(|m| m.contains("attack.epsilon")), "{msgs:?}");
                assert!(msgs.len() >= 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_keys_are_reported_individually() {
        let text = VALID
            .replace("learning_rate = 0.1\n", "")
            .replace("alpha = 0.025\n", "");
        let err = parse_config_str(&text).unwrap_err();
        match err {
            CliError::Config(msgs) => {
                assert!(msgs.iter().any(|m| m.contains("optimizer.learning_rate")));
                assert!(msgs.iter().any(|m| m.contains("attack.alpha")));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn emitted_config_reparses_to_an_equal_value() {
        let cfg = parse_config_str(VALID).unwrap();
        let emitted = emit_config(&cfg);
        let reparsed = parse_config_str(&emitted).unwrap();
        assert_eq!(cfg, reparsed);
    }

    #[test]
    fn idx_dataset_round_trips() {
        let text = VALID.replace(
            "kind = \"two_moons\"\ntrain_samples = 400\ntest_samples = 400\nnoise_std = 0.1",
            "kind = \"idx\"\ntrain_images = \"a\"\ntrain_labels = \"b\"\ntest_images = \"c\"\ntest_labels = \"d\"\ntrain_limit = 10000",
        );
        let text = text.replace("num_classes = 2", "num_classes = 10");
        let cfg = parse_config_str(&text).unwrap();
        let reparsed = parse_config_str(&emit_config(&cfg)).unwrap();
        assert_eq!(cfg, reparsed);
    }
}
