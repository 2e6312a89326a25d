//! Hardware non-idealities as an [`nncore::Context`](crate::nncore::Context):
//! control-bit quantization, laser/SOA/detector noise, analog weight decay
//! with a refresh policy, and bank insertion loss.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nncore::{Context, Mlp};

mod decay;
mod noise;
mod quantize;

pub use decay::{decayed_weight, refresh_deadtime, DecayConfig, InsertionLoss, RefreshPolicy};
pub use noise::{
    apply_detector_noise, apply_input_noise, laser_noise_rms, nonideal_preactivation, NoiseConfig,
    AMPS_PER_UNIT,
};
pub use quantize::{
    layer_range, quantize, quantize_layer, quantize_network, QuantMode, QuantizerConfig,
};

/// Every knob, all off by default. `insertion_loss: None` means `beta = 1`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NonIdealityConfig {
    pub quantizer: QuantizerConfig,
    pub noise: NoiseConfig,
    pub decay: Option<DecayConfig>,
    pub insertion_loss: Option<InsertionLoss>,
}

impl NonIdealityConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.quantizer.validate()?;
        self.noise.validate()?;
        if let Some(d) = &self.decay {
            d.validate()?;
        }
        if let Some(il) = &self.insertion_loss {
            if !(il.db_per_mrr >= 0.0) || !il.db_per_mrr.is_finite() {
                return Err(format!("insertion loss must be >= 0 dB, got {}", il.db_per_mrr));
            }
        }
        Ok(())
    }

    pub fn beta(&self) -> f64 {
        self.insertion_loss.map_or(1.0, |il| il.beta())
    }

    /// The noise actually applied, with detector noise referred through
    /// the receiver gain.
    pub fn effective_noise(&self) -> NoiseConfig {
        let mut noise = self.noise;
        if let Some(il) = &self.insertion_loss {
            noise.pd_tia_rms_amps *= il.detector_noise_gain();
        }
        noise
    }

    /// The network actually programmed for inference: trimmed per the
    /// quantizer mode.
    pub fn inference_weights(&self, mlp: &Mlp) -> Mlp {
        quantize_network(mlp, &self.quantizer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Training,
    Inference,
}

/// Stateful non-ideal context. `k` counts images since the last write of the
/// bank; decay is uniform across all weights.
#[derive(Debug, Clone)]
pub struct NonIdealContext {
    cfg: NonIdealityConfig,
    phase: Phase,
    gain: f64,
    noise: NoiseConfig,
    interval: Option<u64>,
    decay_active: bool,
    k: u64,
    rng: ChaCha8Rng,
}

impl NonIdealContext {
    /// Training context: decay only if `decay.in_training`, with `k` reset
    /// at every update. Train-and-inference quantization runs after each
    /// update.
    pub fn training(cfg: NonIdealityConfig, seed: u64) -> Self {
        let decay_active = cfg.decay.is_some_and(|d| d.in_training);
        Self::build(cfg, Phase::Training, None, decay_active, seed)
    }

    /// Inference context: `k` resets according to the refresh policy, with
    /// `batch_size` giving the per-batch interval.
    pub fn inference(cfg: NonIdealityConfig, batch_size: usize, seed: u64) -> Self {
        let interval = cfg.decay.and_then(|d| d.refresh.interval(batch_size));
        let decay_active = cfg.decay.is_some();
        Self::build(cfg, Phase::Inference, interval, decay_active, seed)
    }

    fn build(
        cfg: NonIdealityConfig,
        phase: Phase,
        interval: Option<u64>,
        decay_active: bool,
        seed: u64,
    ) -> Self {
        Self {
            gain: cfg.insertion_loss.map_or(1.0, |il| il.mac_gain()),
            noise: cfg.effective_noise(),
            cfg,
            phase,
            interval,
            decay_active,
            k: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn config(&self) -> &NonIdealityConfig {
        &self.cfg
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Images since the last write.
    pub fn images_since_write(&self) -> u64 {
        self.k
    }
}

impl Context for NonIdealContext {
    fn mac_gain(&self, _layer: usize) -> f64 {
        match (&self.cfg.decay, self.decay_active) {
            (Some(d), true) if self.k > 0 => self.gain * d.factor(self.k),
            _ => self.gain,
        }
    }

    fn perturb_inputs(&mut self, _layer: usize, x: &mut [f64]) {
        apply_input_noise(x, &self.noise, &mut self.rng);
    }

    fn perturb_preactivations(&mut self, _layer: usize, z: &mut [f64]) {
        apply_detector_noise(z, &self.noise, &mut self.rng);
    }

    fn advance(&mut self) {
        self.k += 1;
        if self.interval.is_some_and(|n| self.k >= n) {
            self.k = 0;
        }
    }

    fn refresh(&mut self) {
        self.k = 0;
    }

    fn after_update(&mut self, mlp: &mut Mlp) {
        let q = &self.cfg.quantizer;
        if q.bits.is_some() && q.mode == QuantMode::TrainAndInference {
            for layer in mlp.layers_mut() {
                quantize_layer(layer, q.bits, q.w_max);
            }
        }
    }
}
