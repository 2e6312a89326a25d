use serde::{Deserialize, Serialize};

/// When stored weights are rewritten during inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefreshPolicy {
    PerImage,
    /// Every `batch_size` images, matching the training write cadence.
    PerBatch,
    Never,
    EveryKImages(u64),
}

impl RefreshPolicy {
    /// Images between refreshes, or `None` for never.
    pub fn interval(&self, batch_size: usize) -> Option<u64> {
        match *self {
            RefreshPolicy::PerImage => Some(1),
            RefreshPolicy::PerBatch => Some(batch_size.max(1) as u64),
            RefreshPolicy::Never => None,
            RefreshPolicy::EveryKImages(k) => Some(k.max(1)),
        }
    }
}

/// Leaky analog memory: a weight written `k` images ago holds
/// `w0 * exp(-k * t_latency / tau_ret)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayConfig {
    pub tau_ret: f64,
    pub t_latency: f64,
    pub refresh: RefreshPolicy,
    /// Apply decay while training too (weights rewritten at every update).
    pub in_training: bool,
}

impl DecayConfig {
    /// A config with the given retention/latency ratio and a 1 ns latency.
    pub fn from_ratio(ratio: f64, refresh: RefreshPolicy, in_training: bool) -> Self {
        Self {
            tau_ret: ratio * 1e-9,
            t_latency: 1e-9,
            refresh,
            in_training,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.tau_ret > 0.0) || !(self.t_latency > 0.0) {
            return Err(format!(
                "tau_ret and t_latency must be > 0, got {} and {}",
                self.tau_ret, self.t_latency
            ));
        }
        Ok(())
    }

    pub fn ratio(&self) -> f64 {
        self.tau_ret / self.t_latency
    }

    /// Multiplier applied to every weight `k` images after its last write.
    pub fn factor(&self, k: u64) -> f64 {
        (-(k as f64) * self.t_latency / self.tau_ret).exp()
    }
}

pub fn decayed_weight(w0: f64, k: u64, cfg: &DecayConfig) -> f64 {
    w0 * cfg.factor(k)
}

/// Refresh dead-time added per classified image, taking one write time per
/// refresh.
pub fn refresh_deadtime(policy: RefreshPolicy, t_write: f64, batch_size: usize) -> f64 {
    match policy.interval(batch_size) {
        Some(k) => t_write / k as f64,
        None => 0.0,
    }
}

/// Optical loss through a weight bank, applied as a linear gain on the MAC.
///
/// With `tia_compensated` the receiver gain is `1/beta`: the photocurrent
/// `beta * (x' . w) + n` is amplified back to signal level, so the loss
/// shows up only as a `1/beta` larger input-referred detector noise.
/// Without it the raw `beta * (x' . w) + n` feeds the activation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InsertionLoss {
    pub db_per_mrr: f64,
    pub mrrs_per_bank: usize,
    pub tia_compensated: bool,
}

impl Default for InsertionLoss {
    fn default() -> Self {
        Self {
            db_per_mrr: 0.125,
            mrrs_per_bank: 80,
            tia_compensated: true,
        }
    }
}

impl InsertionLoss {
    pub fn total_db(&self) -> f64 {
        self.db_per_mrr * self.mrrs_per_bank as f64
    }

    pub fn beta(&self) -> f64 {
        10f64.powf(-self.total_db() / 10.0)
    }

    /// Gain seen by the weighted sum after the receiver.
    pub fn mac_gain(&self) -> f64 {
        if self.tia_compensated {
            1.0
        } else {
            self.beta()
        }
    }

    /// Factor on the detector noise after the receiver.
    pub fn detector_noise_gain(&self) -> f64 {
        if self.tia_compensated {
            1.0 / self.beta()
        } else {
            1.0
        }
    }
}
