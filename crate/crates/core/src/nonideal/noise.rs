use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// One normalized signal unit in amperes: 1 mW of optical power detected
/// at 1 A/W responsivity.
pub const AMPS_PER_UNIT: f64 = 1e-3;

/// Gaussian noise magnitudes, all RMS. Optical terms are fractions of the
/// 1 mW per-wavelength carrier; the detector term is an input-referred
/// current in amperes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Multiplicative laser intensity noise `dx`.
    pub laser_rms: f64,
    /// Additive amplifier noise `n_SOA`.
    pub soa_rms: f64,
    /// PD/TIA integrated noise current (A), added after the MAC.
    pub pd_tia_rms_amps: f64,
}

impl NoiseConfig {
    pub fn optical(rms: f64) -> Self {
        Self {
            laser_rms: rms,
            soa_rms: rms,
            pd_tia_rms_amps: 0.0,
        }
    }

    pub fn detector(amps: f64) -> Self {
        Self {
            pd_tia_rms_amps: amps,
            ..Self::default()
        }
    }

    /// Laser term derived from a relative intensity noise spec.
    pub fn with_rin(mut self, rin_db_per_hz: f64, bandwidth_hz: f64) -> Self {
        self.laser_rms = laser_noise_rms(rin_db_per_hz, bandwidth_hz);
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("laser_rms", self.laser_rms),
            ("soa_rms", self.soa_rms),
            ("pd_tia_rms_amps", self.pd_tia_rms_amps),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        Ok(())
    }

    pub fn has_input_noise(&self) -> bool {
        self.laser_rms > 0.0 || self.soa_rms > 0.0
    }

    /// Detector noise in normalized signal units.
    pub fn pd_tia_rms(&self) -> f64 {
        self.pd_tia_rms_amps / AMPS_PER_UNIT
    }
}

/// Fractional RMS intensity noise `(10^(RIN/10) * f)^(1/2)`.
pub fn laser_noise_rms(rin_db_per_hz: f64, bandwidth_hz: f64) -> f64 {
    (10f64.powf(rin_db_per_hz / 10.0) * bandwidth_hz.max(0.0)).sqrt()
}

fn gaussian(rng: &mut impl Rng, rms: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    rms * z
}

/// `x' = x * (1 + dx) + n_SOA`, fresh draws per element. Disabled terms
/// draw nothing, so a zero config leaves `x` bit-for-bit unchanged.
pub fn apply_input_noise(x: &mut [f64], cfg: &NoiseConfig, rng: &mut impl Rng) {
    let (laser, soa) = (cfg.laser_rms > 0.0, cfg.soa_rms > 0.0);
    if !laser && !soa {
        return;
    }
    for xi in x.iter_mut() {
        if laser {
            *xi *= 1.0 + gaussian(rng, cfg.laser_rms);
        }
        if soa {
            *xi += gaussian(rng, cfg.soa_rms);
        }
    }
}

/// Adds detector noise `n_j` to each preactivation.
pub fn apply_detector_noise(z: &mut [f64], cfg: &NoiseConfig, rng: &mut impl Rng) {
    let rms = cfg.pd_tia_rms();
    if rms > 0.0 {
        for zj in z.iter_mut() {
            *zj += gaussian(rng, rms);
        }
    }
}

/// `beta * (x' . w) + n_j` for a single weight-bank row.
pub fn nonideal_preactivation(
    x_prime: &[f64],
    w_row: &[f64],
    beta: f64,
    cfg: &NoiseConfig,
    rng: &mut impl Rng,
) -> f64 {
    assert_eq!(x_prime.len(), w_row.len(), "input and weight row lengths differ");
    let dot: f64 = x_prime.iter().zip(w_row).map(|(x, w)| x * w).sum();
    let mut z = [beta * dot];
    apply_detector_noise(&mut z, cfg, rng);
    z[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn moments(samples: &[f64]) -> (f64, f64) {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var.sqrt())
    }

    #[test]
    fn rin_arithmetic() {
        // sqrt(1e-15 * 1e10) = sqrt(1e-5)
        assert!((laser_noise_rms(-150.0, 10e9) - 1e-5f64.sqrt()).abs() < 1e-15);
        assert!((laser_noise_rms(-150.0, 10e9) - 3.162e-3).abs() < 1e-6);
        assert_eq!(laser_noise_rms(-150.0, 0.0), 0.0);
        // 10 dB less RIN per decade of bandwidth gives the same product.
        let a = laser_noise_rms(-140.0, 1e9);
        let b = laser_noise_rms(-150.0, 1e10);
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn zero_config_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x0 = vec![0.0, 0.25, 1.0, 0.7];
        let mut x = x0.clone();
        apply_input_noise(&mut x, &NoiseConfig::default(), &mut rng);
        assert_eq!(x, x0);
    }

    #[test]
    fn laser_noise_is_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = NoiseConfig {
            laser_rms: 0.3,
            ..NoiseConfig::default()
        };
        let mut x = vec![0.0; 100];
        apply_input_noise(&mut x, &cfg, &mut rng);
        assert!(x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn input_noise_statistics() {
        // Monte Carlo: x = 1 with laser 0.1 and SOA 0.05 gives
        // std = sqrt(0.1^2 + 0.05^2), mean 1.
        let n = 1_000_000;
        let cfg = NoiseConfig {
            laser_rms: 0.1,
            soa_rms: 0.05,
            pd_tia_rms_amps: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut x = vec![1.0; n];
        apply_input_noise(&mut x, &cfg, &mut rng);
        let (mean, std) = moments(&x);
        let want = (0.1f64.powi(2) + 0.05f64.powi(2)).sqrt();
        assert!((std / want - 1.0).abs() < 0.01, "std {std} vs {want}");
        assert!((mean - 1.0).abs() < 3.0 * want / (n as f64).sqrt());
    }

    #[test]
    fn detector_noise_in_normalized_units() {
        let cfg = NoiseConfig::detector(2e-3);
        assert!((cfg.pd_tia_rms() - 2.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<f64> = (0..200_000)
            .map(|_| nonideal_preactivation(&[0.0], &[1.0], 1.0, &cfg, &mut rng))
            .collect();
        let (mean, std) = moments(&samples);
        assert!((std / 2.0 - 1.0).abs() < 0.01, "{std}");
        assert!(mean.abs() < 3.0 * 2.0 / (samples.len() as f64).sqrt());
    }

    #[test]
    fn noiseless_preactivation() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = [1.0, 0.5, 0.0, 1.0, 0.25];
        let w = [0.2, -0.4, 3.0, 0.1, 0.8];
        // 0.2 - 0.2 + 0 + 0.1 + 0.2 = 0.3
        let z = nonideal_preactivation(&x, &w, 0.1, &NoiseConfig::default(), &mut rng);
        assert!((z - 0.03).abs() < 1e-15);
        let plain = nonideal_preactivation(&x, &w, 1.0, &NoiseConfig::default(), &mut rng);
        assert!((plain - 0.3).abs() < 1e-15);
    }

    #[test]
    fn seeded_reproducibility() {
        let cfg = NoiseConfig::optical(0.2);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut x = vec![0.5; 16];
            apply_input_noise(&mut x, &cfg, &mut rng);
            x
        };
        assert_eq!(draw(11), draw(11));
        assert_ne!(draw(11), draw(12));
    }
}
