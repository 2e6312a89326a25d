use serde::{Deserialize, Serialize};

use super::ArchError;

/// Lumped array power model. Watts, farads, hertz, volts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerModelParams {
    pub p_dac: f64,
    pub p_sram_static: f64,
    pub p_sram_dynamic: f64,
    pub activity: f64,
    pub c_load: f64,
    pub frequency: f64,
    pub v_swing: f64,
}

impl Default for PowerModelParams {
    /// Placeholder DAC/SRAM figures; the load is one DEOAM cell refreshed at
    /// its write rate `1 / (2 * 63.3 ns)`.
    fn default() -> Self {
        Self {
            p_dac: 5e-3,
            p_sram_static: 10e-6,
            p_sram_dynamic: 1e-3,
            activity: 1.0,
            c_load: 14.005e-12,
            frequency: 1.0 / (2.0 * 63.3e-9),
            v_swing: 2.0,
        }
    }
}

impl PowerModelParams {
    pub fn validate(&self) -> Result<(), ArchError> {
        for (name, v) in [
            ("p_dac", self.p_dac),
            ("p_sram_static", self.p_sram_static),
            ("p_sram_dynamic", self.p_sram_dynamic),
            ("c_load", self.c_load),
            ("frequency", self.frequency),
            ("v_swing", self.v_swing),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ArchError::BadParams(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.activity) {
            return Err(ArchError::BadParams(format!(
                "activity must be in [0, 1], got {}",
                self.activity
            )));
        }
        Ok(())
    }

    /// `alpha C f V^2` of one analog cell.
    pub fn cell_dynamic_power(&self) -> f64 {
        self.activity * self.c_load * self.frequency * self.v_swing * self.v_swing
    }
}

/// `n^2 P_DAC + n P_SRAM_dynamic + n^2 P_SRAM_static`.
pub fn p_sram_dac(p: &PowerModelParams, n: u64) -> f64 {
    let n = n as f64;
    n * n * p.p_dac + n * p.p_sram_dynamic + n * n * p.p_sram_static
}

/// `(P_DAC + alpha C f V^2) n`.
pub fn p_deoam(p: &PowerModelParams, n: u64) -> f64 {
    (p.p_dac + p.cell_dynamic_power()) * n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MemoryArch {
    SramDac,
    Deoam,
}

/// DACs instantiated for an `n x n` array: one per cell for SRAM-DAC, one
/// per row for DEOAM.
pub fn dac_count(arch: MemoryArch, n: u64) -> u64 {
    match arch {
        MemoryArch::SramDac => n * n,
        MemoryArch::Deoam => n,
    }
}

/// Smallest `n >= 1` with `p_deoam < p_sram_dac`.
pub fn crossover_n(p: &PowerModelParams) -> Result<u64, ArchError> {
    p.validate()?;
    // n (a n + b - c) > 0  <=>  n > (c - b) / a
    let a = p.p_dac + p.p_sram_static;
    let b = p.p_sram_dynamic;
    let c = p.p_dac + p.cell_dynamic_power();
    let wins = |n: u64| p_deoam(p, n) < p_sram_dac(p, n);
    let guess = if a > 0.0 {
        ((c - b) / a).floor().max(0.0) as u64 + 1
    } else if b > c {
        1
    } else {
        return Err(ArchError::NoCrossover);
    };
    // Absorb rounding in the closed form.
    let mut n = guess.saturating_sub(2).max(1);
    while !wins(n) {
        n += 1;
        if n > guess + 2 {
            return Err(ArchError::NoCrossover);
        }
    }
    Ok(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub n: u64,
    pub p_sram_dac: f64,
    pub p_deoam: f64,
    pub dacs_sram_dac: u64,
    pub dacs_deoam: u64,
}

pub fn power_sweep(p: &PowerModelParams, ns: &[u64]) -> Vec<PowerRow> {
    ns.iter()
        .map(|&n| PowerRow {
            n,
            p_sram_dac: p_sram_dac(p, n),
            p_deoam: p_deoam(p, n),
            dacs_sram_dac: dac_count(MemoryArch::SramDac, n),
            dacs_deoam: dac_count(MemoryArch::Deoam, n),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn zero() -> PowerModelParams {
        PowerModelParams {
            p_dac: 0.0,
            p_sram_static: 0.0,
            p_sram_dynamic: 0.0,
            activity: 1.0,
            c_load: 0.0,
            frequency: 0.0,
            v_swing: 0.0,
        }
    }

    #[test]
    fn point_values() {
        let p = PowerModelParams::default();
        assert_eq!(p_sram_dac(&p, 1), p.p_dac + p.p_sram_dynamic + p.p_sram_static);
        assert_eq!(p_sram_dac(&zero(), 17), 0.0);
        let alpha0 = PowerModelParams { activity: 0.0, ..p };
        assert_eq!(p_deoam(&alpha0, 9), 9.0 * p.p_dac);
        // 14.005 pF * 7.9 MHz * 4 V^2
        let cell = PowerModelParams { p_dac: 0.0, ..p };
        assert!((p_deoam(&cell, 1) - 0.4425e-3).abs() < 0.001e-3, "{}", p_deoam(&cell, 1));
    }

    #[test]
    fn crossovers() {
        let unit = PowerModelParams { p_dac: 1.0, ..zero() };
        assert_eq!(crossover_n(&unit).unwrap(), 2);
        let dac_only = PowerModelParams { p_dac: 5e-3, c_load: 0.0, ..zero() };
        assert_eq!(crossover_n(&dac_only).unwrap(), 2);
        assert!(crossover_n(&PowerModelParams::default()).is_ok());
        let flat = PowerModelParams {
            p_dac: 0.0,
            p_sram_dynamic: 1.0,
            c_load: 1.0,
            frequency: 1.0,
            v_swing: 2.0,
            ..zero()
        };
        assert_eq!(crossover_n(&flat), Err(ArchError::NoCrossover));
        let n = crossover_n(&PowerModelParams::default()).unwrap();
        let p = PowerModelParams::default();
        assert!(p_deoam(&p, n) < p_sram_dac(&p, n));
        assert!(n == 1 || p_deoam(&p, n - 1) >= p_sram_dac(&p, n - 1));
    }

    #[test]
    fn dac_law() {
        for row in power_sweep(&PowerModelParams::default(), &[1, 2, 8, 64]) {
            assert_eq!(row.dacs_sram_dac, row.n * row.n);
            assert_eq!(row.dacs_deoam, row.n);
        }
    }

    proptest! {
        #[test]
        fn second_differences(n in 1u64..1023, dac in 0.0f64..1e-2, st in 0.0f64..1e-4, dy in 0.0f64..1e-2) {
            let p = PowerModelParams { p_dac: dac, p_sram_static: st, p_sram_dynamic: dy, ..PowerModelParams::default() };
            let d2 = |f: &dyn Fn(u64) -> f64| f(n + 1) - 2.0 * f(n) + f(n - 1);
            let s = d2(&|k| p_sram_dac(&p, k));
            prop_assert!((s - 2.0 * (dac + st)).abs() <= 1e-9 * (1.0 + (n * n) as f64 * (dac + st)));
            let l = d2(&|k| p_deoam(&p, k));
            prop_assert!(l.abs() <= 1e-12 * (1.0 + n as f64));
        }

        #[test]
        fn crossover_is_minimal(dac in 1e-4f64..1e-2, st in 0.0f64..1e-4, dy in 0.0f64..1e-2, c in 1e-13f64..1e-10) {
            let p = PowerModelParams { p_dac: dac, p_sram_static: st, p_sram_dynamic: dy, c_load: c, ..PowerModelParams::default() };
            let n = crossover_n(&p).unwrap();
            prop_assert!(p_deoam(&p, n) < p_sram_dac(&p, n));
            prop_assert!(n == 1 || p_deoam(&p, n - 1) >= p_sram_dac(&p, n - 1));
        }
    }
}
