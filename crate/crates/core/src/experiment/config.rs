use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{ExperimentError, Kind};
use crate::archmodel::{DevicePowerTable, PowerModelParams};
use crate::devices::{registry, DeoamMeasured, LeakageModel, MemoryTechnology, OpticalParams};
use crate::nncore::{TrainConfig, MNIST_DIMS};
use crate::nonideal::{InsertionLoss, QuantMode, RefreshPolicy};

fn log_grid(lo_exp: f64, hi_exp: f64, per_decade: usize) -> Vec<f64> {
    let n = ((hi_exp - lo_exp) * per_decade as f64).round() as usize;
    (0..=n)
        .map(|i| 10f64.powf(lo_exp + i as f64 / per_decade as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Directory holding the four uncompressed MNIST IDX files.
    pub dir: PathBuf,
    pub verify_sha256: bool,
    /// Pixels above this become 1, the rest 0; `null` keeps grey levels.
    pub binarize_threshold: Option<f64>,
    /// Use only the first N training / test images (quick runs).
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("data/mnist"),
            verify_sha256: false,
            binarize_threshold: Some(0.5),
            train_limit: None,
            test_limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BitsSweep {
    pub bits: Vec<u32>,
    pub modes: Vec<QuantMode>,
    pub w_max: f64,
    pub epochs: usize,
    pub target_accuracy: f64,
}

impl Default for BitsSweep {
    fn default() -> Self {
        Self {
            bits: (2..=10).collect(),
            modes: vec![QuantMode::InferenceOnly, QuantMode::TrainAndInference],
            w_max: 0.5,
            epochs: 5,
            target_accuracy: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSweep {
    /// Laser and SOA RMS, as a fraction of signal power.
    pub optical_levels: Vec<f64>,
    /// PD/TIA RMS current (A).
    pub pd_tia_levels: Vec<f64>,
    pub insertion_loss: Option<InsertionLoss>,
    pub naive_epochs: usize,
    /// PD/TIA noise (A) injected while training the noise-aware network.
    pub trained_pd_tia: f64,
    pub trained_epochs: usize,
    pub degradation: f64,
    /// Optical level up to which the naive network should stay flat.
    pub flat_optical_level: f64,
}

impl Default for NoiseSweep {
    fn default() -> Self {
        let mut pd = vec![0.0];
        pd.extend(log_grid(-6.0, -2.0, 4));
        Self {
            optical_levels: (0..=12).map(|i| i as f64 * 0.03125).collect(),
            pd_tia_levels: pd,
            insertion_loss: Some(InsertionLoss::default()),
            naive_epochs: 1,
            trained_pd_tia: 2e-3,
            trained_epochs: 10,
            degradation: 0.1,
            flat_optical_level: 0.125,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetentionSweep {
    /// tau_ret / t_latency.
    pub ratios: Vec<f64>,
    /// Batch sizes for the trained-with networks.
    pub batch_sizes: Vec<usize>,
    /// Batch size of the single trained-without network.
    pub without_batch_size: usize,
    pub include_trained_without: bool,
    pub refresh: RefreshPolicy,
    pub latency: f64,
    pub degradation: f64,
}

impl Default for RetentionSweep {
    fn default() -> Self {
        Self {
            ratios: log_grid(0.5, 3.5, 4),
            batch_sizes: vec![64, 32, 16],
            without_batch_size: 64,
            include_trained_without: true,
            refresh: RefreshPolicy::PerBatch,
            latency: 1e-9,
            degradation: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemoryComparison {
    pub technologies: Vec<MemoryTechnology>,
    pub layer_dims: Vec<usize>,
    pub mrrs_per_bank: usize,
    pub dataset_size: u64,
    pub batch_sizes: Vec<u64>,
    pub epochs: u64,
    pub power_table: DevicePowerTable,
}

impl Default for MemoryComparison {
    fn default() -> Self {
        Self {
            technologies: registry(),
            layer_dims: MNIST_DIMS.to_vec(),
            mrrs_per_bank: 80,
            dataset_size: 50_000,
            batch_sizes: vec![64, 32, 16],
            epochs: 1,
            power_table: DevicePowerTable::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerScaling {
    pub params: PowerModelParams,
    pub n_values: Vec<u64>,
}

impl Default for PowerScaling {
    fn default() -> Self {
        Self {
            params: PowerModelParams::default(),
            n_values: (1..=1024).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceFom {
    pub optics: OpticalParams,
    pub deoam: DeoamMeasured,
    pub leakage: LeakageModel,
    pub retention_v0: f64,
    pub retention_duration: f64,
    pub retention_dt: f64,
    pub write_duration: f64,
    pub write_dt: f64,
    /// Switching frequencies (Hz) converted to write times.
    pub frequencies: Vec<f64>,
    pub write_traces: bool,
}

impl Default for DeviceFom {
    fn default() -> Self {
        Self {
            optics: OpticalParams::default(),
            deoam: DeoamMeasured::default(),
            leakage: LeakageModel::default(),
            retention_v0: 2.0,
            retention_duration: 2e-3,
            retention_dt: 0.2e-6,
            write_duration: 500e-9,
            write_dt: 0.1e-9,
            frequencies: vec![4e3, 100e3, 1e6, 1.0, 15e6],
            write_traces: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchReport {
    pub layer_dims: Vec<usize>,
    pub mrrs_per_bank: usize,
    /// Ring limit from this finesse; `null` skips the check.
    pub finesse: Option<f64>,
    pub spacing_factor: f64,
    pub technology: String,
    pub dataset_size: u64,
    pub batch_size: u64,
    pub epochs: u64,
    pub power_table: DevicePowerTable,
}

impl Default for ArchReport {
    fn default() -> Self {
        Self {
            layer_dims: MNIST_DIMS.to_vec(),
            mrrs_per_bank: 80,
            finesse: Some(368.0),
            spacing_factor: crate::archmodel::DEFAULT_SPACING_FACTOR,
            technology: "DEOAM".into(),
            dataset_size: 50_000,
            batch_size: 64,
            epochs: 1,
            power_table: DevicePowerTable::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    /// Seeds per stochastic grid point.
    pub replicates: usize,
    /// Network widths for the training kinds, input first.
    pub layer_dims: Vec<usize>,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub bits: BitsSweep,
    pub noise: NoiseSweep,
    pub retention: RetentionSweep,
    pub memories: MemoryComparison,
    pub power: PowerScaling,
    pub devices: DeviceFom,
    pub arch: ArchReport,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: Kind::TrainBaseline,
            seed: 42,
            replicates: 3,
            layer_dims: MNIST_DIMS.to_vec(),
            data: DataConfig::default(),
            train: TrainConfig::default(),
            bits: BitsSweep::default(),
            noise: NoiseSweep::default(),
            retention: RetentionSweep::default(),
            memories: MemoryComparison::default(),
            power: PowerScaling::default(),
            devices: DeviceFom::default(),
            arch: ArchReport::default(),
        }
    }
}

fn bad(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

fn non_empty<T>(name: &str, v: &[T]) -> Result<(), ExperimentError> {
    if v.is_empty() {
        Err(bad(format!("{name} grid is empty")))
    } else {
        Ok(())
    }
}

fn fraction(name: &str, v: f64) -> Result<(), ExperimentError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(bad(format!("{name} must be in (0, 1), got {v}")))
    }
}

fn sorted(name: &str, v: &[f64], positive: bool) -> Result<(), ExperimentError> {
    if v.iter().any(|x| !x.is_finite() || *x < 0.0 || (positive && *x == 0.0)) {
        return Err(bad(format!("{name} values must be finite and {}", if positive { "> 0" } else { ">= 0" })));
    }
    if v.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn for_kind(kind: Kind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Checks only the sections the selected kind reads.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.replicates == 0 {
            return Err(bad("replicates must be >= 1"));
        }
        if self.kind.needs_dataset() {
            self.train.validate()?;
            if self.layer_dims.len() < 2 || self.layer_dims.contains(&0) {
                return Err(bad("layer_dims needs at least two non-zero widths"));
            }
            if self.data.train_limit == Some(0) || self.data.test_limit == Some(0) {
                return Err(bad("dataset limits must be >= 1"));
            }
        }
        match self.kind {
            Kind::TrainBaseline => {}
            Kind::SweepBits => {
                let b = &self.bits;
                non_empty("bits", &b.bits)?;
                non_empty("modes", &b.modes)?;
                if b.bits.iter().any(|&n| n == 0 || n > 32) {
                    return Err(bad("bits must be in 1..=32"));
                }
                if !(b.w_max > 0.0) || b.epochs == 0 {
                    return Err(bad("w_max must be > 0 and epochs >= 1"));
                }
            }
            Kind::SweepNoise => {
                let n = &self.noise;
                non_empty("optical_levels", &n.optical_levels)?;
                non_empty("pd_tia_levels", &n.pd_tia_levels)?;
                sorted("optical_levels", &n.optical_levels, false)?;
                sorted("pd_tia_levels", &n.pd_tia_levels, false)?;
                fraction("degradation", n.degradation)?;
                if n.naive_epochs == 0 || n.trained_epochs == 0 || !(n.trained_pd_tia >= 0.0) {
                    return Err(bad("noise training epochs must be >= 1 and trained_pd_tia >= 0"));
                }
            }
            Kind::SweepRetention => {
                let r = &self.retention;
                non_empty("ratios", &r.ratios)?;
                non_empty("batch_sizes", &r.batch_sizes)?;
                sorted("ratios", &r.ratios, true)?;
                fraction("degradation", r.degradation)?;
                if r.batch_sizes.contains(&0) || r.without_batch_size == 0 || !(r.latency > 0.0) {
                    return Err(bad("batch sizes and latency must be > 0"));
                }
            }
            Kind::CompareMemories => {
                let m = &self.memories;
                non_empty("technologies", &m.technologies)?;
                non_empty("batch_sizes", &m.batch_sizes)?;
                for t in &m.technologies {
                    t.validate()?;
                }
            }
            Kind::PowerScaling => {
                non_empty("n_values", &self.power.n_values)?;
                if self.power.n_values.contains(&0) {
                    return Err(bad("n must be >= 1"));
                }
                self.power.params.validate()?;
            }
            Kind::DeviceFom => {
                self.devices.optics.validate()?;
            }
            Kind::ArchReport => {}
        }
        Ok(())
    }
}
