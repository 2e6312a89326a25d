use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{positive, DeviceError, LeakageModel, OpticalParams};

pub const MIN_EXTRACT_SAMPLES: usize = 16;
const SMOOTHING_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceUnit {
    Volts,
    NormalizedOpticalPower,
}

impl TraceUnit {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceUnit::Volts => "volts",
            TraceUnit::NormalizedOpticalPower => "normalized_optical_power",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "volts" => Some(TraceUnit::Volts),
            "normalized_optical_power" => Some(TraceUnit::NormalizedOpticalPower),
            _ => None,
        }
    }
}

impl fmt::Display for TraceUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sampled waveform, `t` in seconds and strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeTrace {
    t: Vec<f64>,
    value: Vec<f64>,
    unit: TraceUnit,
}

impl TimeTrace {
    pub fn new(t: Vec<f64>, value: Vec<f64>, unit: TraceUnit) -> Result<Self, DeviceError> {
        if t.len() != value.len() {
            return Err(DeviceError::BadTrace(format!(
                "{} times but {} values",
                t.len(),
                value.len()
            )));
        }
        if let Some(i) = t.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(DeviceError::NotIncreasing(i + 1));
        }
        Ok(Self { t, value, unit })
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.value
    }

    pub fn unit(&self) -> TraceUnit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn last(&self) -> Option<(f64, f64)> {
        Some((*self.t.last()?, *self.value.last()?))
    }

    /// Pointwise map onto a new unit.
    pub fn map(&self, unit: TraceUnit, f: impl Fn(f64) -> f64) -> Self {
        Self {
            t: self.t.clone(),
            value: self.value.iter().map(|v| f(*v)).collect(),
            unit,
        }
    }

    /// Samples `lo..hi` (by index), for splitting a trace into segments.
    pub fn slice(&self, lo: usize, hi: usize) -> Self {
        Self {
            t: self.t[lo..hi].to_vec(),
            value: self.value[lo..hi].to_vec(),
            unit: self.unit,
        }
    }

    /// Two-column CSV: `t_seconds,<unit>` header then one row per sample.
    pub fn write_csv(&self, path: &Path) -> Result<(), DeviceError> {
        std::fs::write(path, self.to_csv()?).map_err(|source| DeviceError::Io {
            path: path.to_owned(),
            source,
        })
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, DeviceError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t_seconds", self.unit.as_str()])?;
        for (t, v) in self.t.iter().zip(&self.value) {
            w.serialize((t, v))?;
        }
        w.into_inner().map_err(|e| DeviceError::Csv(e.into_error().into()))
    }

    pub fn read_csv(path: &Path) -> Result<Self, DeviceError> {
        let mut rdr = csv::Reader::from_path(path)?;
        let headers = rdr.headers()?.clone();
        let unit = match (headers.get(0), headers.get(1)) {
            (Some("t_seconds"), Some(u)) => TraceUnit::parse(u),
            _ => None,
        }
        .ok_or_else(|| DeviceError::BadTrace(format!("unrecognised header {headers:?}")))?;
        let mut t = Vec::new();
        let mut value = Vec::new();
        for row in rdr.deserialize() {
            let (ti, vi): (f64, f64) = row?;
            t.push(ti);
            value.push(vi);
        }
        Self::new(t, value, unit)
    }
}

fn steps(duration: f64, dt: f64) -> Result<usize, DeviceError> {
    positive("duration", duration)?;
    positive("dt", dt)?;
    Ok((duration / dt).round().max(1.0) as usize)
}

/// Capacitor voltage during retention: `dV/dt = -I_leak(V) / C`, explicit
/// RK4 with step `dt`. The capacitor holds at the bottom of the leakage
/// domain once fully discharged.
pub fn synth_retention_voltage(
    c: f64,
    leakage: &LeakageModel,
    v0: f64,
    duration: f64,
    dt: f64,
) -> Result<TimeTrace, DeviceError> {
    positive("capacitance", c)?;
    let n = steps(duration, dt)?;
    let (lo, _) = leakage.domain();
    leakage.current(v0)?;
    let rate = |v: f64| -> Result<f64, DeviceError> { Ok(-leakage.current(v.max(lo))? / c) };
    let limit = 0.01 * v0.abs();
    let mut t = Vec::with_capacity(n + 1);
    let mut value = Vec::with_capacity(n + 1);
    let mut v = v0;
    t.push(0.0);
    value.push(v);
    for i in 1..=n {
        if v > lo {
            let k1 = rate(v)?;
            let k2 = rate(v + 0.5 * dt * k1)?;
            let k3 = rate(v + 0.5 * dt * k2)?;
            let k4 = rate(v + dt * k3)?;
            let next = (v + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).max(lo);
            let dv = (next - v).abs();
            if dv > limit {
                return Err(DeviceError::StepTooCoarse { dv, limit });
            }
            v = next;
        }
        t.push(i as f64 * dt);
        value.push(v);
    }
    TimeTrace::new(t, value, TraceUnit::Volts)
}

/// Retention trace as seen at the through port: `V(t)` mapped through the
/// resonance shift and the ring's Lorentzian.
pub fn synth_retention_trace(
    c: f64,
    leakage: &LeakageModel,
    v0: f64,
    optics: &OpticalParams,
    duration: f64,
    dt: f64,
) -> Result<TimeTrace, DeviceError> {
    let volts = synth_retention_voltage(c, leakage, v0, duration, dt)?;
    Ok(volts.map(TraceUnit::NormalizedOpticalPower, |v| optics.through_power(v)))
}

/// First-order charge through the transmission gate:
/// `V(t) = V_target + (V_start - V_target) exp(-t / (R C))`.
pub fn synth_write_trace(
    r_drive: f64,
    c: f64,
    v_start: f64,
    v_target: f64,
    duration: f64,
    dt: f64,
) -> Result<TimeTrace, DeviceError> {
    let tau = positive("r_drive", r_drive)? * positive("capacitance", c)?;
    let n = steps(duration, dt)?;
    let t: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
    let value = t
        .iter()
        .map(|ti| v_target + (v_start - v_target) * (-ti / tau).exp())
        .collect();
    TimeTrace::new(t, value, TraceUnit::Volts)
}

/// Start index, start value and signed excursion to the final value, after
/// checking the smoothed trace is monotone from the start onwards.
fn excursion(trace: &TimeTrace) -> Result<(usize, f64, f64), DeviceError> {
    if trace.len() < MIN_EXTRACT_SAMPLES {
        return Err(DeviceError::TooFewSamples(trace.len()));
    }
    let v = trace.values();
    let end = v[v.len() - 1];
    // The step starts at the sample farthest from where the trace settles.
    let start = (0..v.len())
        .max_by(|a, b| (v[*a] - end).abs().total_cmp(&(v[*b] - end).abs()))
        .unwrap_or(0);
    let delta = end - v[start];
    if delta == 0.0 || !delta.is_finite() {
        return Err(DeviceError::FlatTrace);
    }
    let tail = &v[start..];
    let half = SMOOTHING_WINDOW / 2;
    let smoothed: Vec<f64> = (0..tail.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(tail.len());
            tail[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let tol = 1e-9 * delta.abs();
    if let Some(i) = smoothed
        .windows(2)
        .position(|w| (w[1] - w[0]) * delta.signum() < -tol)
    {
        return Err(DeviceError::NonMonotone(start + i + 1));
    }
    Ok((start, v[start], delta))
}

/// Time at which the trace first reaches `start_value + fraction * delta`,
/// linearly interpolated.
fn crossing(trace: &TimeTrace, start: usize, v0: f64, delta: f64, fraction: f64) -> Result<f64, DeviceError> {
    let level = v0 + fraction * delta;
    let progress = |v: f64| (v - v0) / delta;
    let (t, v) = (trace.times(), trace.values());
    for i in start + 1..v.len() {
        let (p0, p1) = (progress(v[i - 1]), progress(v[i]));
        if p1 >= fraction {
            if p1 == p0 {
                return Ok(t[i]);
            }
            return Ok(t[i - 1] + (t[i] - t[i - 1]) * (fraction - p0) / (p1 - p0));
        }
    }
    Err(DeviceError::NoCrossing(level))
}

/// One time constant: time from the step start to `(1 - 1/e)` of the
/// total excursion.
pub fn extract_time_constant(trace: &TimeTrace) -> Result<f64, DeviceError> {
    let (start, v0, delta) = excursion(trace)?;
    let frac = 1.0 - (-1f64).exp();
    Ok(crossing(trace, start, v0, delta, frac)? - trace.times()[start])
}

/// Time between the 10% and 90% crossings of the excursion.
pub fn extract_10_90(trace: &TimeTrace) -> Result<f64, DeviceError> {
    let (start, v0, delta) = excursion(trace)?;
    Ok(crossing(trace, start, v0, delta, 0.9)? - crossing(trace, start, v0, delta, 0.1)?)
}

/// `E = integral V(t) I_leak(V(t)) dt`, trapezoidal over the samples.
pub fn write_energy_from_leakage(trace: &TimeTrace, leakage: &LeakageModel) -> Result<f64, DeviceError> {
    if trace.unit() != TraceUnit::Volts {
        return Err(DeviceError::WrongUnit {
            expected: TraceUnit::Volts,
            found: trace.unit(),
        });
    }
    let power = trace
        .values()
        .iter()
        .map(|v| Ok(v * leakage.current(*v)?))
        .collect::<Result<Vec<f64>, DeviceError>>()?;
    Ok(trace
        .times()
        .windows(2)
        .zip(power.windows(2))
        .map(|(t, p)| 0.5 * (t[1] - t[0]) * (p[0] + p[1]))
        .sum())
}
