//! Experiment configuration.
//!
//! The config file is sectioned key = value text (TOML) with sections
//! `[dataset]`, `[sampler]`, `[model]`, `[loss]`, `[schedule]`, `[stage2]`
//! and `[eval]` plus a top-level `seed`. Unknown keys are rejected; parse ->
//! serialize -> parse is idempotent. Defaults follow the reference training
//! recipe.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::augment::AugmentSpec;
use crate::data::synthetic::SyntheticSpec;
use crate::error::{Error, Result};
use crate::loss::LossWeights;
use crate::tensor::optim::{LrKind, LrSchedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub sampler: SamplerConfig,
    pub model: ModelConfig,
    pub loss: LossConfig,
    pub schedule: ScheduleConfig,
    pub stage2: Stage2Config,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            dataset: DatasetConfig::default(),
            sampler: SamplerConfig::default(),
            model: ModelConfig::default(),
            loss: LossConfig::default(),
            schedule: ScheduleConfig::default(),
            stage2: Stage2Config::default(),
            eval: EvalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    /// Gaussian-mixture data generated from the seed.
    Synthetic,
    /// CIFAR binary directory at `path`.
    Cifar,
    /// Prepared dataset file at `path`.
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    pub path: Option<String>,
    pub classes: usize,
    pub dim: usize,
    /// Per-class size of the balanced base before long-tail subsampling.
    pub n_max: usize,
    pub imbalance_ratio: f64,
    pub test_per_class: usize,
    pub mean_scale: f64,
    pub noise_sigma: f64,
    pub augment: bool,
    pub augment_pad: usize,
    /// Per-channel standardization constants for CIFAR ingestion.
    pub channel_mean: [f64; 3],
    pub channel_std: [f64; 3],
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            kind: DatasetKind::Synthetic,
            path: None,
            classes: 10,
            dim: 32,
            n_max: 1200,
            imbalance_ratio: 100.0,
            test_per_class: 200,
            mean_scale: 1.0,
            noise_sigma: 0.45,
            augment: false,
            augment_pad: 4,
            channel_mean: [0.4914, 0.4822, 0.4465],
            channel_std: [0.2470, 0.2435, 0.2616],
        }
    }
}

impl DatasetConfig {
    pub fn synthetic_spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            classes: self.classes,
            dim: self.dim,
            n_max: self.n_max,
            imbalance_ratio: self.imbalance_ratio,
            test_per_class: self.test_per_class,
            mean_scale: self.mean_scale,
            noise_sigma: self.noise_sigma,
        }
    }

    pub fn augment_spec(&self) -> AugmentSpec {
        AugmentSpec {
            enabled: self.augment,
            pad: self.augment_pad,
            flip_prob: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    /// Stage-1 class-aware adjustment.
    pub gamma: f64,
    /// Stage-2 rebalancing sampler adjustment.
    pub gamma_prime: f64,
    pub beta_alpha: f64,
    pub beta_beta: f64,
    /// Replace the class-aware tail sampler with a uniform one (ablation).
    pub tail_uniform: bool,
    /// Draw one lambda per example instead of one per batch.
    pub per_example_lambda: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            gamma: 0.0,
            gamma_prime: 1.0,
            beta_alpha: 1.0,
            beta_beta: 1.0,
            tail_uniform: false,
            per_example_lambda: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Encoder hidden layer widths (at least one, each followed by ReLU).
    pub hidden: Vec<usize>,
    /// Encoder output width d_g.
    pub feature_dim: usize,
    /// Projection embedding width d_z.
    pub embed_dim: usize,
    /// Contrastive retrieval temperature.
    pub tau: f64,
    /// Centroid EMA momentum m.
    pub centroid_momentum: f64,
    pub renormalize_centroids: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: vec![128],
            feature_dim: 64,
            embed_dim: 128,
            tau: 0.07,
            centroid_momentum: 0.99,
            renormalize_centroids: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub omega_u: f64,
    pub omega_it: f64,
    pub omega_d: f64,
    pub tau_d: f64,
    /// Override for omega_u once the interpolative phase starts (the
    /// CIFAR recipe sets it to 0).
    pub omega_u_after_warmup: Option<f64>,
    pub enable_ce_it: bool,
    pub enable_cc_it: bool,
    /// Include the centroid contrastive term during warm-up.
    pub warmup_cc: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            omega_u: 1.0,
            omega_it: 1.0,
            omega_d: 0.5,
            tau_d: 10.0,
            omega_u_after_warmup: None,
            enable_ce_it: true,
            enable_cc_it: true,
            warmup_cc: true,
        }
    }
}

impl LossConfig {
    pub fn weights(&self) -> LossWeights {
        LossWeights {
            omega_u: self.omega_u,
            omega_it: self.omega_it,
            omega_d: self.omega_d,
            tau_d: self.tau_d,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub epochs: usize,
    /// Warm-up curriculum length T: epochs training only the uniform branch.
    pub warmup_epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub lr_kind: LrKind,
    /// Linear learning-rate warm-up (distinct from the curriculum T).
    pub lr_warmup_epochs: usize,
    pub lr_milestones: Vec<usize>,
    pub lr_decay: f64,
    pub weight_decay: f64,
    pub momentum: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            epochs: 60,
            warmup_epochs: 30,
            batch_size: 128,
            base_lr: 0.1,
            lr_kind: LrKind::Cosine,
            lr_warmup_epochs: 5,
            lr_milestones: vec![120, 160],
            lr_decay: 0.01,
            weight_decay: 2e-4,
            momentum: 0.9,
        }
    }
}

impl ScheduleConfig {
    pub fn lr_schedule(&self) -> LrSchedule {
        match self.lr_kind {
            LrKind::Cosine => LrSchedule::cosine(self.base_lr, self.lr_warmup_epochs, self.epochs),
            LrKind::Step => LrSchedule::step(
                self.base_lr,
                self.lr_warmup_epochs,
                self.epochs,
                self.lr_milestones.clone(),
                self.lr_decay,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Stage2Config {
    pub epochs: usize,
    /// Stage-2 base learning rate = stage-1 base_lr times this factor.
    pub lr_factor: f64,
    pub freeze_encoder: bool,
    /// When the encoder is unfrozen, its learning rate is the stage-2 rate
    /// times this factor.
    pub encoder_lr_factor: f64,
}

impl Default for Stage2Config {
    fn default() -> Self {
        Stage2Config {
            epochs: 10,
            lr_factor: 0.1,
            freeze_encoder: true,
            encoder_lr_factor: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub batch_size: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { batch_size: 256 }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        ExperimentConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialized form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schedule.warmup_epochs > self.schedule.epochs {
            return Err(Error::Config(format!(
                "warmup_epochs {} exceeds epochs {}",
                self.schedule.warmup_epochs, self.schedule.epochs
            )));
        }
        if self.schedule.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.model.hidden.is_empty() {
            return Err(Error::Config("model.hidden must list at least one layer".into()));
        }
        if self.model.tau <= 0.0 {
            return Err(Error::Config(format!("tau must be positive, got {}", self.model.tau)));
        }
        if self.loss.tau_d <= 0.0 {
            return Err(Error::Config(format!(
                "tau_d must be positive, got {}",
                self.loss.tau_d
            )));
        }
        if !(0.0..=1.0).contains(&self.model.centroid_momentum) {
            return Err(Error::Config(format!(
                "centroid_momentum must be in [0, 1], got {}",
                self.model.centroid_momentum
            )));
        }
        if !(self.sampler.beta_alpha > 0.0) || !(self.sampler.beta_beta > 0.0) {
            return Err(Error::Config(format!(
                "beta parameters must be positive, got ({}, {})",
                self.sampler.beta_alpha, self.sampler.beta_beta
            )));
        }
        if self.sampler.gamma < 0.0 || self.sampler.gamma_prime < 0.0 {
            return Err(Error::Config("gamma values must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.loss.omega_d) {
            return Err(Error::Config(format!(
                "omega_d must be in [0, 1], got {}",
                self.loss.omega_d
            )));
        }
        Ok(())
    }
}

/// Sweepable configuration axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Beta,
    Gamma,
    GammaPrime,
    OmegaD,
    WarmupT,
    LossAblation,
}

impl SweepAxis {
    pub fn parse(name: &str) -> Result<SweepAxis> {
        match name {
            "beta" => Ok(SweepAxis::Beta),
            "gamma" => Ok(SweepAxis::Gamma),
            "gamma_prime" => Ok(SweepAxis::GammaPrime),
            "omega_d" => Ok(SweepAxis::OmegaD),
            "T" => Ok(SweepAxis::WarmupT),
            "loss-ablation" => Ok(SweepAxis::LossAblation),
            other => Err(Error::invalid(format!(
                "unknown sweep axis `{other}` (expected beta, gamma, gamma_prime, omega_d, T, loss-ablation)"
            ))),
        }
    }
}

/// Loss-component ablation presets, the rows of the component on/off grid.
/// `mixup` (interpolative CE only) is the Mixup baseline.
pub const ABLATION_PRESETS: &[&str] = &[
    "ce",
    "mixup",
    "mixup_warmup",
    "ce_ccit_warmup",
    "ce_ceit_warmup",
    "full_nowarmup",
    "full",
];

fn apply_ablation(cfg: &mut ExperimentConfig, preset: &str) -> Result<()> {
    let default_t = cfg.schedule.warmup_epochs;
    match preset {
        "ce" => {
            cfg.loss.omega_it = 0.0;
            cfg.schedule.warmup_epochs = 0;
        }
        "mixup" => {
            cfg.loss.omega_u = 0.0;
            cfg.loss.enable_cc_it = false;
            cfg.loss.warmup_cc = false;
            cfg.schedule.warmup_epochs = 0;
        }
        "mixup_warmup" => {
            cfg.loss.omega_u_after_warmup = Some(0.0);
            cfg.loss.enable_cc_it = false;
            cfg.loss.warmup_cc = false;
            cfg.schedule.warmup_epochs = default_t;
        }
        "ce_ccit_warmup" => {
            cfg.loss.enable_ce_it = false;
        }
        "ce_ceit_warmup" => {
            cfg.loss.enable_cc_it = false;
            cfg.loss.warmup_cc = false;
        }
        "full_nowarmup" => {
            cfg.schedule.warmup_epochs = 0;
        }
        "full" => {}
        other => {
            return Err(Error::invalid(format!(
                "unknown ablation preset `{other}` (expected one of {ABLATION_PRESETS:?})"
            )))
        }
    }
    Ok(())
}

/// Apply one sweep value to a config copy. Returns the row label.
pub fn apply_axis_value(
    cfg: &mut ExperimentConfig,
    axis: SweepAxis,
    value: &str,
) -> Result<String> {
    let parse_f64 = |v: &str| -> Result<f64> {
        v.parse::<f64>()
            .map_err(|_| Error::invalid(format!("`{v}` is not a number")))
    };
    match axis {
        SweepAxis::Beta => {
            let (a, b) = value
                .split_once(':')
                .ok_or_else(|| Error::invalid(format!("beta value `{value}` must be alpha:beta")))?;
            cfg.sampler.beta_alpha = parse_f64(a.trim())?;
            cfg.sampler.beta_beta = parse_f64(b.trim())?;
            Ok(format!("beta=({},{})", cfg.sampler.beta_alpha, cfg.sampler.beta_beta))
        }
        SweepAxis::Gamma => {
            if value == "uniform" {
                cfg.sampler.tail_uniform = true;
                Ok("gamma=uniform".to_string())
            } else {
                cfg.sampler.tail_uniform = false;
                cfg.sampler.gamma = parse_f64(value)?;
                Ok(format!("gamma={}", cfg.sampler.gamma))
            }
        }
        SweepAxis::GammaPrime => {
            cfg.sampler.gamma_prime = parse_f64(value)?;
            Ok(format!("gamma_prime={}", cfg.sampler.gamma_prime))
        }
        SweepAxis::OmegaD => {
            cfg.loss.omega_d = parse_f64(value)?;
            Ok(format!("omega_d={}", cfg.loss.omega_d))
        }
        SweepAxis::WarmupT => {
            cfg.schedule.warmup_epochs = value
                .parse::<usize>()
                .map_err(|_| Error::invalid(format!("`{value}` is not an epoch count")))?;
            Ok(format!("T={}", cfg.schedule.warmup_epochs))
        }
        SweepAxis::LossAblation => {
            apply_ablation(cfg, value)?;
            Ok(format!("ablation={value}"))
        }
    }
}
