use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{lorentzian, DeviceError, TUNING_NM_PER_V};

/// Measured (V, I) leakage points at one optical bus power, linearly
/// interpolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageCurve {
    pub volts: Vec<f64>,
    pub amps: Vec<f64>,
    pub bus_power_dbm: f64,
}

impl LeakageCurve {
    pub fn new(volts: Vec<f64>, amps: Vec<f64>, bus_power_dbm: f64) -> Result<Self, DeviceError> {
        if volts.len() != amps.len() || volts.len() < 2 {
            return Err(DeviceError::BadTable(format!(
                "need >= 2 matching points, got {} volts and {} currents",
                volts.len(),
                amps.len()
            )));
        }
        if let Some(i) = volts.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(DeviceError::BadTable(format!(
                "voltages not strictly increasing at row {}",
                i + 1
            )));
        }
        if let Some(i) = amps.iter().position(|a| !(*a > 0.0)) {
            return Err(DeviceError::BadTable(format!("non-positive current at row {i}")));
        }
        Ok(Self {
            volts,
            amps,
            bus_power_dbm,
        })
    }

    /// Samples `model` on `n` evenly spaced voltages across its domain.
    pub fn tabulate(model: &LeakageModel, n: usize, bus_power_dbm: f64) -> Result<Self, DeviceError> {
        let (lo, hi) = model.domain();
        let volts: Vec<f64> = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect();
        let amps = volts
            .iter()
            .map(|v| model.current(*v))
            .collect::<Result<_, _>>()?;
        Self::new(volts, amps, bus_power_dbm)
    }

    fn interpolate(&self, v: f64) -> f64 {
        let i = self.volts.partition_point(|x| *x <= v).clamp(1, self.volts.len() - 1);
        let (v0, v1) = (self.volts[i - 1], self.volts[i]);
        let (a0, a1) = (self.amps[i - 1], self.amps[i]);
        a0 + (a1 - a0) * (v - v0) / (v1 - v0)
    }

    /// Reads a two-column `volts,amperes` CSV with a header row.
    pub fn read_csv(path: &Path, bus_power_dbm: f64) -> Result<Self, DeviceError> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut volts = Vec::new();
        let mut amps = Vec::new();
        for row in rdr.deserialize() {
            let (v, a): (f64, f64) = row?;
            volts.push(v);
            amps.push(a);
        }
        Self::new(volts, amps, bus_power_dbm)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), DeviceError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["volts", "amperes"])?;
        for (v, a) in self.volts.iter().zip(&self.amps) {
            w.serialize((v, a))?;
        }
        w.flush().map_err(|source| DeviceError::Io {
            path: path.to_owned(),
            source,
        })
    }
}

/// Capacitor leakage current as a function of stored voltage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum LeakageModel {
    /// Dark current plus a photocurrent following the ring's Lorentzian:
    /// the laser sits on the 0 V resonance, so leakage peaks at 0 V.
    Photo {
        i_dark: f64,
        i_opt: f64,
        tuning_nm_per_v: f64,
        fwhm_nm: f64,
        v_max: f64,
    },
    /// `I = V / r_eff`.
    Ohmic { r_eff: f64, v_max: f64 },
    /// `I = i0` while charge remains.
    Constant { i0: f64, v_max: f64 },
    Table(LeakageCurve),
}

impl Default for LeakageModel {
    /// 2 nA dark current, 200 nA total at 0 V (0.5 dBm bus power).
    fn default() -> Self {
        LeakageModel::Photo {
            i_dark: 2e-9,
            i_opt: 198e-9,
            tuning_nm_per_v: TUNING_NM_PER_V,
            fwhm_nm: 0.019,
            v_max: 2.0,
        }
    }
}

impl LeakageModel {
    /// Voltage range over which the model is defined.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            LeakageModel::Photo { v_max, .. }
            | LeakageModel::Ohmic { v_max, .. }
            | LeakageModel::Constant { v_max, .. } => (0.0, *v_max),
            LeakageModel::Table(t) => (t.volts[0], t.volts[t.volts.len() - 1]),
        }
    }

    pub fn current(&self, v: f64) -> Result<f64, DeviceError> {
        let (lo, hi) = self.domain();
        // Tolerate round-off at the edges.
        let slack = 1e-9 * (hi - lo).abs().max(1.0);
        if v < lo - slack || v > hi + slack {
            return Err(DeviceError::OutOfDomain { v, lo, hi });
        }
        let v = v.clamp(lo, hi);
        Ok(match self {
            LeakageModel::Photo {
                i_dark,
                i_opt,
                tuning_nm_per_v,
                fwhm_nm,
                ..
            } => i_dark + i_opt * lorentzian(tuning_nm_per_v * v, *fwhm_nm),
            LeakageModel::Ohmic { r_eff, .. } => v / r_eff,
            LeakageModel::Constant { i0, .. } => {
                if v > 0.0 {
                    *i0
                } else {
                    0.0
                }
            }
            LeakageModel::Table(t) => t.interpolate(v),
        })
    }
}
