//! Analog-memory device models: MRR optics, the measured DEOAM parameter
//! set, a capacitor-leakage trace synthesizer with time-constant extraction,
//! and the memory-technology registry.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod leakage;
mod registry;
mod trace;

pub use leakage::{LeakageCurve, LeakageModel};
pub use registry::{registry, registry_from_json, technology, MemoryTechnology, WriteTime};
pub use trace::{
    extract_10_90, extract_time_constant, synth_retention_trace, synth_retention_voltage,
    synth_write_trace, write_energy_from_leakage, TimeTrace, TraceUnit, MIN_EXTRACT_SAMPLES,
};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("{name} must be > 0, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("unknown memory technology {0:?}")]
    UnknownTechnology(String),
    #[error("time step too coarse: |dV| = {dv:.3e} V in one step exceeds 1% of V0 ({limit:.3e} V)")]
    StepTooCoarse { dv: f64, limit: f64 },
    #[error("voltage {v} V outside leakage-curve domain [{lo}, {hi}]")]
    OutOfDomain { v: f64, lo: f64, hi: f64 },
    #[error("trace has {0} samples, need at least {MIN_EXTRACT_SAMPLES}")]
    TooFewSamples(usize),
    #[error("trace time not strictly increasing at sample {0}")]
    NotIncreasing(usize),
    #[error("trace is not monotone after its extremum (smoothed sample {0})")]
    NonMonotone(usize),
    #[error("trace has no excursion to measure")]
    FlatTrace,
    #[error("trace never crosses the {0:.3} level")]
    NoCrossing(f64),
    #[error("expected a {expected} trace, got {found}")]
    WrongUnit {
        expected: TraceUnit,
        found: TraceUnit,
    },
    #[error("invalid trace file: {0}")]
    BadTrace(String),
    #[error("invalid leakage table: {0}")]
    BadTable(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn positive(name: &'static str, value: f64) -> Result<f64, DeviceError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(DeviceError::NonPositive { name, value })
    }
}

/// `F = FSR / FWHM`.
pub fn finesse(fsr: f64, fwhm: f64) -> Result<f64, DeviceError> {
    Ok(fsr / positive("fwhm", fwhm)?)
}

/// Path delay `L n_g / c` plus ring build-up `F R n_g / c`, in seconds.
pub fn compute_time(path_length: f64, group_index: f64, finesse: f64, radius: f64) -> f64 {
    (path_length + finesse * radius) * group_index / SPEED_OF_LIGHT
}

/// `t_wr = 1 / (2 f)`.
pub fn write_time_from_frequency(f_hz: f64) -> Result<f64, DeviceError> {
    Ok(1.0 / (2.0 * positive("frequency", f_hz)?))
}

/// `N_b = log2((mu_max - mu_min) / sigma)`, not floored.
pub fn bit_precision(mu_max: f64, mu_min: f64, sigma: f64) -> Result<f64, DeviceError> {
    let range = positive("mu_max - mu_min", mu_max - mu_min)?;
    Ok((range / positive("sigma", sigma)?).log2())
}

/// Through-port power `1 - (1 - T_min) / (1 + (2 delta / FWHM)^2)` with
/// `T_min = 10^(-ER/10)`.
pub fn lorentzian_transmission(detuning_nm: f64, fwhm_nm: f64, er_db: f64) -> f64 {
    let t_min = 10f64.powf(-er_db / 10.0);
    1.0 - (1.0 - t_min) * lorentzian(detuning_nm, fwhm_nm)
}

/// Unit-peak Lorentzian line shape.
pub fn lorentzian(detuning: f64, fwhm: f64) -> f64 {
    let x = 2.0 * detuning / fwhm;
    1.0 / (1.0 + x * x)
}

/// Nominal tuning efficiency, 6.22 pm/V, in nm/V.
pub const TUNING_NM_PER_V: f64 = 6.22e-3;

/// Linear resonance shift in nm at the nominal tuning efficiency.
pub fn resonance_shift(volts: f64) -> f64 {
    TUNING_NM_PER_V * volts
}

/// Ring and bus optics. Lengths in metres, wavelengths in nm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpticalParams {
    pub fsr_nm: f64,
    pub fwhm_nm: f64,
    pub q_factor: f64,
    pub extinction_ratio_db: f64,
    pub group_index: f64,
    pub tuning_nm_per_v: f64,
    pub modulation_db_per_v: f64,
    pub path_length_m: f64,
    pub ring_radius_m: f64,
    pub channel_spacing_nm: f64,
}

/// Measured ring perimeter, metres.
pub const RING_PERIMETER_M: f64 = 144.248e-6;

impl Default for OpticalParams {
    fn default() -> Self {
        Self {
            fsr_nm: 4.67,
            fwhm_nm: 0.019,
            q_factor: 49234.0,
            // Midpoint of the measured 15.6-19.9 dB.
            extinction_ratio_db: 17.75,
            group_index: 3.70,
            tuning_nm_per_v: TUNING_NM_PER_V,
            modulation_db_per_v: 0.23,
            path_length_m: 500e-6,
            ring_radius_m: RING_PERIMETER_M / (2.0 * std::f64::consts::PI),
            channel_spacing_nm: 0.34,
        }
    }
}

impl OpticalParams {
    pub fn validate(&self) -> Result<(), DeviceError> {
        positive("fwhm_nm", self.fwhm_nm)?;
        if !(self.fsr_nm > self.fwhm_nm) {
            return Err(DeviceError::NonPositive {
                name: "fsr_nm - fwhm_nm",
                value: self.fsr_nm - self.fwhm_nm,
            });
        }
        positive("group_index", self.group_index)?;
        positive("ring_radius_m", self.ring_radius_m)?;
        positive("path_length_m", self.path_length_m)?;
        Ok(())
    }

    pub fn finesse(&self) -> f64 {
        self.fsr_nm / self.fwhm_nm
    }

    pub fn compute_time(&self) -> f64 {
        compute_time(
            self.path_length_m,
            self.group_index,
            self.finesse(),
            self.ring_radius_m,
        )
    }

    pub fn detuning(&self, volts: f64) -> f64 {
        self.tuning_nm_per_v * volts
    }

    /// Through-port power with the laser parked on the 0 V resonance.
    pub fn through_power(&self, volts: f64) -> f64 {
        lorentzian_transmission(self.detuning(volts), self.fwhm_nm, self.extinction_ratio_db)
    }
}

/// A measured quantity with its spread. `nominal` is `None` where only the
/// extremes were reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub min: f64,
    pub nominal: Option<f64>,
    pub max: f64,
}

impl Measured {
    pub const fn new(min: f64, nominal: f64, max: f64) -> Self {
        Self {
            min,
            nominal: Some(nominal),
            max,
        }
    }

    pub fn is_ordered(&self) -> bool {
        match self.nominal {
            Some(n) => self.min <= n && n <= self.max,
            None => self.min <= self.max,
        }
    }
}

/// The measured DEOAM cell. SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeoamMeasured {
    pub c_mem: f64,
    pub write_energy: Measured,
    pub tau_ret: Measured,
    pub t_ret_10_90: Measured,
    pub tau_rise: Measured,
    pub tau_fall: Measured,
    pub t_rise_10_90: Measured,
    pub t_fall_10_90: Measured,
    pub compute_time: Measured,
    pub bit_precision: Measured,
    pub v_max: f64,
}

impl Default for DeoamMeasured {
    fn default() -> Self {
        Self {
            c_mem: 14.005e-12,
            write_energy: Measured::new(26.82e-12, 55.97e-12, 80.97e-12),
            tau_ret: Measured::new(0.2590e-3, 0.5527e-3, 0.8345e-3),
            t_ret_10_90: Measured::new(0.3330e-3, 0.5735e-3, 0.7957e-3),
            tau_rise: Measured::new(35.5e-9, 43.8e-9, 52.0e-9),
            tau_fall: Measured::new(51.0e-9, 63.3e-9, 71.7e-9),
            t_rise_10_90: Measured::new(65.5e-9, 75.3e-9, 91.3e-9),
            t_fall_10_90: Measured::new(76.2e-9, 89.4e-9, 121.2e-9),
            compute_time: Measured {
                min: 70.87e-12,
                nominal: None,
                max: 79.51e-12,
            },
            bit_precision: Measured::new(5.33, 5.65, 5.97),
            v_max: 2.0,
        }
    }
}

impl DeoamMeasured {
    /// Full-swing `C V^2` write energy.
    pub fn cv2_energy(&self) -> f64 {
        self.c_mem * self.v_max * self.v_max
    }

    /// Drive resistance giving the nominal rise time constant.
    pub fn drive_resistance(&self) -> f64 {
        self.tau_rise.nominal.unwrap_or(self.tau_rise.min) / self.c_mem
    }
}
