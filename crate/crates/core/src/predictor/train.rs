//! Mini-batch training loop.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::backward::{loss_denominator, reduce, sample_gradient, SampleGradient};
use super::data::WindowSet;
use super::model::{nmse_loss, MicroModel, TrainMode};
use crate::channel::stream_rng;
use crate::error::{bail, Error, Result};

const SHUFFLE_STREAM: u64 = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Optimizer {
    /// Adam with decoupled weight decay.
    #[default]
    AdamW,
    /// Plain gradient descent, with the same decoupled decay.
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Loss denominator offset.
    pub eps: f64,
    pub mode: TrainMode,
    pub optimizer: Optimizer,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 16,
            epochs: 50,
            seed: 42,
            eps: 1e-8,
            mode: TrainMode::LoraOnly,
            optimizer: Optimizer::AdamW,
            weight_decay: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            bail!(Config, "learning_rate must be positive");
        }
        if !(self.eps > 0.0) {
            bail!(Config, "eps must be positive");
        }
        if self.batch_size == 0 {
            bail!(Config, "batch_size must be positive");
        }
        if !(self.weight_decay >= 0.0) {
            bail!(Config, "weight_decay must be non-negative");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.adam_eps > 0.0) {
            bail!(Config, "Adam moments must lie in [0, 1) with positive epsilon");
        }
        Ok(())
    }
}

/// Maps per-sample gradient jobs. Results must come back in index order so
/// the reduction, and with it the trained weights, do not depend on the
/// executor.
pub trait Executor {
    fn map(&self, n: usize, job: &(dyn Fn(usize) -> SampleGradient + Sync)) -> Vec<SampleGradient>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SerialExecutor;

impl Executor for SerialExecutor {
    fn map(&self, n: usize, job: &(dyn Fn(usize) -> SampleGradient + Sync)) -> Vec<SampleGradient> {
        (0..n).map(job).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean mini-batch loss.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    pub fn final_val_loss(&self) -> Option<f64> {
        self.epochs.last().and_then(|e| e.val_loss)
    }
}

struct OptimState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

/// Loss of the whole set in one denominator.
pub fn evaluate(model: &MicroModel, set: &WindowSet, eps: f64) -> Result<f64> {
    let y_hat = model.forward(&set.x, set.count)?;
    Ok(nmse_loss(&y_hat, &set.y, eps))
}

/// Trains `model` in place on `train_set`.
pub fn train(
    model: &mut MicroModel,
    train_set: &WindowSet,
    val_set: Option<&WindowSet>,
    cfg: &TrainConfig,
    exec: &dyn Executor,
) -> Result<TrainHistory> {
    cfg.validate()?;
    let c = model.config;
    if train_set.count == 0 {
        bail!(Argument, "no training windows");
    }
    if train_set.dim != c.d_in || train_set.past != c.past || train_set.horizon != c.horizon {
        bail!(Argument, "window shape does not match the model");
    }
    if let Some(v) = val_set {
        if v.dim != c.d_in || v.past != c.past || v.horizon != c.horizon {
            bail!(Argument, "validation window shape does not match the model");
        }
    }

    let trainable: Vec<core::ops::Range<usize>> = model
        .layout
        .slots()
        .into_iter()
        .filter(|s| cfg.mode.trains(s.group))
        .map(|s| s.range())
        .collect();
    let mut state = OptimState {
        m: vec![0.0; model.params.len()],
        v: vec![0.0; model.params.len()],
        step: 0,
    };
    let mut rng = stream_rng(cfg.seed, SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..train_set.count).collect();
    let mut history = TrainHistory::default();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for idx in order.chunks(cfg.batch_size) {
            let denom: f64 = idx
                .iter()
                .map(|&i| loss_denominator(train_set.sample_y(i), 0.0))
                .sum::<f64>()
                + cfg.eps;
            let snapshot: &MicroModel = model;
            let job = |k: usize| {
                let i = idx[k];
                sample_gradient(snapshot, train_set.sample_x(i), train_set.sample_y(i), denom, cfg.mode)
            };
            let parts = exec.map(idx.len(), &job);
            let g = reduce(parts, denom, model.params.len()).map_err(|e| diverged(epoch, e))?;
            loss_sum += g.loss;
            batches += 1;
            apply_update(model, &g.grad, &trainable, &mut state, cfg);
        }
        let train_loss = loss_sum / batches as f64;
        if !train_loss.is_finite() || model.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Training {
                epoch,
                reason: "loss or parameters became non-finite".to_string(),
            });
        }
        let val_loss = match val_set {
            Some(v) if v.count > 0 => Some(evaluate(model, v, cfg.eps)?),
            _ => None,
        };
        history.epochs.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
        });
    }
    Ok(history)
}

fn diverged(epoch: usize, e: Error) -> Error {
    Error::Training {
        epoch,
        reason: alloc::format!("{e}"),
    }
}

fn apply_update(
    model: &mut MicroModel,
    grad: &[f64],
    trainable: &[core::ops::Range<usize>],
    st: &mut OptimState,
    cfg: &TrainConfig,
) {
    let lr = cfg.learning_rate;
    let decay = 1.0 - lr * cfg.weight_decay;
    match cfg.optimizer {
        Optimizer::Sgd => {
            for r in trainable {
                for i in r.clone() {
                    model.params[i] = model.params[i] * decay - lr * grad[i];
                }
            }
        }
        Optimizer::AdamW => {
            st.step += 1;
            let (b1, b2) = (cfg.beta1, cfg.beta2);
            let c1 = 1.0 - libm::pow(b1, st.step as f64);
            let c2 = 1.0 - libm::pow(b2, st.step as f64);
            for r in trainable {
                for i in r.clone() {
                    let g = grad[i];
                    st.m[i] = b1 * st.m[i] + (1.0 - b1) * g;
                    st.v[i] = b2 * st.v[i] + (1.0 - b2) * g * g;
                    let step = (st.m[i] / c1) / (libm::sqrt(st.v[i] / c2) + cfg.adam_eps);
                    model.params[i] = model.params[i] * decay - lr * step;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::baselines::persistence_predict;
    use crate::predictor::data::{Normalizer, WindowSet};
    use crate::predictor::model::ModelConfig;

    fn tiny(d: usize, past: usize, horizon: usize) -> ModelConfig {
        ModelConfig {
            width: 16,
            heads: 2,
            blocks: 1,
            lora_rank: 4,
            ..ModelConfig::new(d, past, horizon)
        }
    }

    #[test]
    fn constant_sequence_is_learned() {
        let series: Vec<Vec<f64>> = (0..80).map(|_| vec![0.8, -1.3, 2.0, 0.4]).collect();
        let train_set = WindowSet::within(&series, 6, 3, 0..64).unwrap();
        let val_set = WindowSet::within(&series, 6, 3, 64..80).unwrap();
        let mut model = MicroModel::new(tiny(4, 6, 3), 1).unwrap();
        let cfg = TrainConfig {
            epochs: 30,
            learning_rate: 1e-2,
            mode: TrainMode::Full,
            ..TrainConfig::default()
        };
        let hist = train(&mut model, &train_set, Some(&val_set), &cfg, &SerialExecutor).unwrap();
        assert_eq!(hist.epochs.len(), 30);
        assert!(hist.final_val_loss().unwrap() <= 1e-3, "{:?}", hist.final_val_loss());
    }

    #[test]
    fn seeded_runs_repeat_exactly() {
        let series: Vec<Vec<f64>> = (0..40).map(|t| vec![libm::sin(t as f64 * 0.3), 0.5]).collect();
        let set = WindowSet::within(&series, 4, 2, 0..40).unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        let run = || {
            let mut m = MicroModel::new(tiny(2, 4, 2), 9).unwrap();
            let h = train(&mut m, &set, None, &cfg, &SerialExecutor).unwrap();
            (h, m.params)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn lora_only_keeps_base_bitwise() {
        let series: Vec<Vec<f64>> = (0..40).map(|t| vec![libm::cos(t as f64 * 0.2), 1.0]).collect();
        let set = WindowSet::within(&series, 4, 2, 0..40).unwrap();
        let mut m = MicroModel::new(tiny(2, 4, 2), 2).unwrap();
        let before = m.clone();
        let cfg = TrainConfig {
            epochs: 5,
            mode: TrainMode::LoraOnly,
            ..TrainConfig::default()
        };
        train(&mut m, &set, None, &cfg, &SerialExecutor).unwrap();
        for s in m.layout.slots() {
            let same = m.slot(s) == before.slot(s);
            assert_eq!(same, !TrainMode::LoraOnly.trains(s.group), "{s:?}");
        }
    }

    #[test]
    fn sinusoid_beats_persistence_by_three_db() {
        // Period of 12 frames, two phases so the features are not collinear.
        let w = core::f64::consts::TAU / 12.0;
        let series: Vec<Vec<f64>> = (0..240)
            .map(|t| {
                let a = w * t as f64;
                vec![libm::cos(a), libm::sin(a), 0.5 * libm::cos(a + 1.0)]
            })
            .collect();
        let (past, horizon) = (24, 6);
        let n_train = 192;
        let norm = Normalizer::fit(&series[..n_train]).unwrap();
        let normed: Vec<Vec<f64>> = series.iter().map(|r| norm.apply(r)).collect();
        let train_set = WindowSet::within(&normed, past, horizon, 0..n_train).unwrap();
        let val_set = WindowSet::within(&normed, past, horizon, n_train..series.len()).unwrap();
        let mut model = MicroModel::new(tiny(3, past, horizon), 4).unwrap();
        let cfg = TrainConfig {
            epochs: 40,
            learning_rate: 3e-3,
            mode: TrainMode::Full,
            ..TrainConfig::default()
        };
        train(&mut model, &train_set, None, &cfg, &SerialExecutor).unwrap();

        let mut err = 0.0;
        let mut err_p = 0.0;
        let mut energy = 0.0;
        let pred = model.forward(&val_set.x, val_set.count).unwrap();
        for i in 0..val_set.count {
            let s = n_train + i;
            let truth = &series[s + past..s + past + horizon];
            let pers = persistence_predict(&series[s..s + past], horizon).unwrap();
            for (k, row) in truth.iter().enumerate() {
                let p = norm.invert(&pred[(i * horizon + k) * 3..(i * horizon + k + 1) * 3]);
                for f in 0..3 {
                    err += (p[f] - row[f]) * (p[f] - row[f]);
                    err_p += (pers[k][f] - row[f]) * (pers[k][f] - row[f]);
                    energy += row[f] * row[f];
                }
            }
        }
        let db = 10.0 * libm::log10(err / energy);
        let db_p = 10.0 * libm::log10(err_p / energy);
        assert!(db <= db_p - 3.0, "model {db:.2} dB vs persistence {db_p:.2} dB");
    }
}
