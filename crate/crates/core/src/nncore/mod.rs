//! Deterministic 784-50-10 style MLP with MNIST ingestion, SGD training and
//! per-class evaluation.
//!
//! Every forward pass goes through a [`Context`], the hook where hardware
//! non-idealities (insertion loss, noise, weight decay, quantization) are
//! injected. [`Ideal`] is the identity context.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod dataset;
pub mod idx;
mod mlp;
mod train;

pub use dataset::{Batch, Dataset, Split};
pub use idx::{load_idx, Mnist};
pub use mlp::{Dense, Gradients, Mlp, Sgd, MNIST_DIMS};
pub use train::{evaluate, evaluate_par, train, train_epoch, Metrics};

pub const NUM_CLASSES: usize = 10;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad magic {found:#010x}, expected {expected:#010x}")]
    BadMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },
    #[error("{path}: truncated, need {expected} bytes but file has {actual}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("invalid label {label} at index {index}")]
    InvalidLabel { index: usize, label: u8 },
    #[error("{path}: sha256 {found} does not match pinned {expected}")]
    Checksum {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("training diverged: non-finite loss {loss} at update {update}")]
    Diverged { update: usize, loss: f64 },
}

/// Hook through which a hardware model perturbs the forward pass.
///
/// For layer `l` the preactivation of neuron `j` is
/// `mac_gain(l) * (x' . w_j) + b_j`, after which
/// `perturb_preactivations` may add detector noise. `x'` is the layer input
/// after `perturb_inputs`.
pub trait Context {
    fn mac_gain(&self, _layer: usize) -> f64 {
        1.0
    }

    fn perturb_inputs(&mut self, _layer: usize, _x: &mut [f64]) {}

    fn perturb_preactivations(&mut self, _layer: usize, _z: &mut [f64]) {}

    /// Called once after every image that passes through the network.
    fn advance(&mut self) {}

    /// Called when every weight has just been (re)written.
    fn refresh(&mut self) {}

    /// Applied to the network after every SGD update.
    fn after_update(&mut self, _mlp: &mut Mlp) {}
}

/// The identity context: no loss, no noise, raw weights.
#[derive(Debug, Clone, Copy, Default)]
pub struct Ideal;

impl Context for Ideal {}

impl<C: Context + ?Sized> Context for &mut C {
    fn mac_gain(&self, layer: usize) -> f64 {
        (**self).mac_gain(layer)
    }
    fn perturb_inputs(&mut self, layer: usize, x: &mut [f64]) {
        (**self).perturb_inputs(layer, x)
    }
    fn perturb_preactivations(&mut self, layer: usize, z: &mut [f64]) {
        (**self).perturb_preactivations(layer, z)
    }
    fn advance(&mut self) {
        (**self).advance()
    }
    fn refresh(&mut self) {
        (**self).refresh()
    }
    fn after_update(&mut self, mlp: &mut Mlp) {
        (**self).after_update(mlp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Step size at the last update as a fraction of `learning_rate`; the
    /// step size falls linearly from `learning_rate` across all updates.
    pub final_lr_fraction: f64,
    /// Heavy-ball momentum; 0 is plain SGD. The velocity lives in digital
    /// memory, each update still writes every analog weight exactly once.
    pub momentum: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            epochs: 1,
            learning_rate: 0.1,
            final_lr_fraction: 0.1,
            momentum: 0.9,
            seed: 42,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.batch_size == 0 {
            return Err(NnError::Config("batch size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(NnError::Config(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..=1.0).contains(&self.final_lr_fraction) {
            return Err(NnError::Config(format!(
                "final learning-rate fraction must be in [0,1], got {}",
                self.final_lr_fraction
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(NnError::Config(format!(
                "momentum must be in [0,1), got {}",
                self.momentum
            )));
        }
        Ok(())
    }

    pub fn updates_per_epoch(&self, dataset_len: usize) -> usize {
        dataset_len.div_ceil(self.batch_size)
    }

    /// Step size of update `update` out of `total`.
    pub fn learning_rate_at(&self, update: usize, total: usize) -> f64 {
        if total <= 1 || self.final_lr_fraction == 1.0 {
            return self.learning_rate;
        }
        let progress = update as f64 / (total - 1) as f64;
        self.learning_rate * (1.0 - (1.0 - self.final_lr_fraction) * progress)
    }
}
