//! Code-sequence forecasting: the micro-transformer, its training loop, and
//! simple baselines.

pub mod backward;
pub mod baselines;
pub mod data;
pub mod model;
mod ops;
pub mod train;

pub use backward::{backward, Gradient};
pub use baselines::{ar_fit, ar_predict, persistence_predict, ArModel};
pub use data::{complexify, predict_codes, realify, Normalizer, WindowSet};
pub use model::{attention, lora_effective, nmse_loss, MicroModel, ModelConfig, ParamGroup, TrainMode};
pub use train::{train, EpochStats, Executor, Optimizer, SerialExecutor, TrainConfig, TrainHistory};
