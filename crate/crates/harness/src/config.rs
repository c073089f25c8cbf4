//! Experiment configuration: TOML file, defaults, validation and hashing.

use std::f64::consts::PI;
use std::path::Path;

use ddfas_core::channel::{FasGeometry, GenerationMode, GridConfig, SequenceParams};
use ddfas_core::predictor::train::Optimizer;
use ddfas_core::predictor::{ModelConfig, TrainConfig, TrainMode};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Correlated,
    PhaseRamp,
}

impl From<ModeName> for GenerationMode {
    fn from(m: ModeName) -> Self {
        match m {
            ModeName::Correlated => GenerationMode::Correlated,
            ModeName::PhaseRamp => GenerationMode::PhaseRamp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerName {
    Adamw,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub n_ports: usize,
    pub spacing_over_lambda: f64,
    pub elevation_rad: f64,
    pub loading_eps: f64,
    pub n_tx: usize,
    pub n_doppler: usize,
    pub n_delay: usize,
    pub frame_duration_s: f64,
    /// Frames per full phase rotation of the median Doppler bin.
    pub frames_per_rotation: f64,
    pub n_paths: usize,
    pub rice_kappa: f64,
    pub mode: ModeName,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection {
            n_ports: 16,
            spacing_over_lambda: 0.1,
            elevation_rad: PI / 3.0,
            loading_eps: 1e-6,
            n_tx: 8,
            n_doppler: 32,
            n_delay: 32,
            frame_duration_s: 1e-3,
            frames_per_rotation: 35.0,
            n_paths: 12,
            rice_kappa: 5.0,
            mode: ModeName::PhaseRamp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompressionSection {
    pub threshold: f64,
    /// Leading fraction of frames used for fitting and training.
    pub train_fraction: f64,
}

impl Default for CompressionSection {
    fn default() -> Self {
        CompressionSection {
            threshold: 0.90,
            train_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub width: usize,
    pub heads: usize,
    pub blocks: usize,
    pub lora_rank: usize,
    pub lora_alpha: f64,
    pub ffn_mult: usize,
    /// Past window length.
    pub past: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            width: 64,
            heads: 4,
            blocks: 2,
            lora_rank: 8,
            lora_alpha: 1.0,
            ffn_mult: 4,
            past: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub eps: f64,
    pub weight_decay: f64,
    pub optimizer: OptimizerName,
    /// LoRA-only fine-tuning when true, full training otherwise.
    pub lora: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            learning_rate: 1e-3,
            batch_size: 16,
            epochs: 50,
            eps: 1e-8,
            weight_decay: 0.0,
            optimizer: OptimizerName::Adamw,
            lora: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub horizons: Vec<usize>,
    pub snr_db: Vec<f64>,
    pub target_rates: Vec<f64>,
    pub ar_order: usize,
    pub ar_ridge: f64,
    pub active_energy: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            horizons: vec![10, 20, 30, 40, 50],
            snr_db: (0..=10).map(|k| 2.0 * k as f64).collect(),
            target_rates: (1..=7).map(|k| 0.5 * k as f64).collect(),
            ar_order: 4,
            ar_ridge: 1e-3,
            active_energy: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n_frames: usize,
    pub channel: ChannelSection,
    pub compression: CompressionSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub eval: EvalSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            n_frames: 600,
            channel: ChannelSection::default(),
            compression: CompressionSection::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
        }
    }
}

fn field(name: &str, msg: &str) -> HarnessError {
    HarnessError::Config(format!("field `{name}`: {msg}"))
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(field(name, "must be a positive finite number"))
    }
}

fn at_least_one(name: &str, v: usize) -> Result<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(field(name, "must be >= 1"))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.channel;
        at_least_one("n_frames", self.n_frames)?;
        at_least_one("channel.n_ports", c.n_ports)?;
        positive("channel.spacing_over_lambda", c.spacing_over_lambda)?;
        if !(0.0..=PI / 2.0).contains(&c.elevation_rad) {
            return Err(field("channel.elevation_rad", "must lie in [0, pi/2]"));
        }
        positive("channel.loading_eps", c.loading_eps)?;
        at_least_one("channel.n_tx", c.n_tx)?;
        at_least_one("channel.n_doppler", c.n_doppler)?;
        at_least_one("channel.n_delay", c.n_delay)?;
        positive("channel.frame_duration_s", c.frame_duration_s)?;
        positive("channel.frames_per_rotation", c.frames_per_rotation)?;
        if !(c.rice_kappa >= 0.0) || !c.rice_kappa.is_finite() {
            return Err(field("channel.rice_kappa", "must be finite and >= 0"));
        }
        if c.n_paths > (c.n_delay - 1) * c.n_doppler {
            return Err(field(
                "channel.n_paths",
                "exceeds the number of non-LoS delay-Doppler bins",
            ));
        }
        let k = &self.compression;
        if !(k.threshold > 0.0 && k.threshold <= 1.0) {
            return Err(field("compression.threshold", "must lie in (0, 1]"));
        }
        if !(k.train_fraction > 0.0 && k.train_fraction < 1.0) {
            return Err(field("compression.train_fraction", "must lie in (0, 1)"));
        }
        let m = &self.model;
        at_least_one("model.width", m.width)?;
        at_least_one("model.heads", m.heads)?;
        if !m.width.is_multiple_of(m.heads) {
            return Err(field("model.heads", "must divide model.width"));
        }
        if m.lora_rank < 1 || m.lora_rank > m.width {
            return Err(field("model.lora_rank", "must lie in 1..=model.width"));
        }
        if !m.lora_alpha.is_finite() {
            return Err(field("model.lora_alpha", "must be finite"));
        }
        at_least_one("model.ffn_mult", m.ffn_mult)?;
        at_least_one("model.past", m.past)?;
        let t = &self.train;
        positive("train.learning_rate", t.learning_rate)?;
        at_least_one("train.batch_size", t.batch_size)?;
        positive("train.eps", t.eps)?;
        if !(t.weight_decay >= 0.0) {
            return Err(field("train.weight_decay", "must be >= 0"));
        }
        let e = &self.eval;
        if e.horizons.is_empty() || e.horizons.contains(&0) {
            return Err(field("eval.horizons", "must be a non-empty list of positive integers"));
        }
        if e.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(field("eval.snr_db", "must be finite"));
        }
        if e.target_rates.iter().any(|r| !(*r >= 0.0)) {
            return Err(field("eval.target_rates", "must be >= 0"));
        }
        at_least_one("eval.ar_order", e.ar_order)?;
        if !(e.ar_ridge >= 0.0) {
            return Err(field("eval.ar_ridge", "must be >= 0"));
        }
        if !(e.active_energy > 0.0 && e.active_energy <= 1.0) {
            return Err(field("eval.active_energy", "must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn sequence_params(&self) -> SequenceParams {
        let c = &self.channel;
        SequenceParams {
            geometry: FasGeometry {
                n_ports: c.n_ports,
                spacing_over_lambda: c.spacing_over_lambda,
                elevation_rad: c.elevation_rad,
                loading_eps: c.loading_eps,
            },
            grid: self.grid(),
            n_paths: c.n_paths,
            rice_kappa: c.rice_kappa,
            mode: c.mode.into(),
        }
    }

    pub fn grid(&self) -> GridConfig {
        let c = &self.channel;
        GridConfig {
            n_tx: c.n_tx,
            n_doppler: c.n_doppler,
            n_delay: c.n_delay,
            frame_duration_s: c.frame_duration_s,
            doppler_res_hz: GridConfig::median_bin_doppler_res(c.n_doppler, c.frame_duration_s, c.frames_per_rotation),
        }
    }

    /// Number of leading frames in the training split.
    pub fn n_train(&self) -> usize {
        ddfas_core::predictor::data::train_split(self.n_frames, self.compression.train_fraction)
    }

    pub fn model_config(&self, d_in: usize, horizon: usize) -> ModelConfig {
        let m = &self.model;
        ModelConfig {
            d_in,
            width: m.width,
            heads: m.heads,
            blocks: m.blocks,
            lora_rank: m.lora_rank,
            lora_alpha: m.lora_alpha,
            past: m.past,
            horizon,
            ffn_mult: m.ffn_mult,
        }
    }

    pub fn train_mode(&self) -> TrainMode {
        if self.train.lora {
            TrainMode::LoraOnly
        } else {
            TrainMode::Full
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            epochs: t.epochs,
            seed: self.seed,
            eps: t.eps,
            mode: self.train_mode(),
            optimizer: match t.optimizer {
                OptimizerName::Adamw => Optimizer::AdamW,
                OptimizerName::Sgd => Optimizer::Sgd,
            },
            weight_decay: t.weight_decay,
            ..TrainConfig::default()
        }
    }
}
