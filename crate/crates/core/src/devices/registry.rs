use serde::{Deserialize, Serialize};

use super::{write_time_from_frequency, DeviceError};

const DAY: f64 = 86_400.0;
const YEAR: f64 = 365.25 * DAY;

/// Either a directly reported write time or one derived from a switching
/// frequency via `1 / (2 f)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WriteTime {
    Seconds(f64),
    FromFrequency(f64),
}

impl WriteTime {
    pub fn seconds(&self) -> f64 {
        match *self {
            WriteTime::Seconds(s) => s,
            WriteTime::FromFrequency(f) => write_time_from_frequency(f).unwrap_or(f64::NAN),
        }
    }
}

/// One analog-memory technology. SI units except area (um^2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryTechnology {
    pub name: String,
    /// Write cycles.
    pub endurance: f64,
    /// The endurance figure is only what has been measured so far.
    #[serde(default)]
    pub endurance_is_lower_bound: bool,
    /// Seconds; `None` where no figure exists.
    pub retention: Option<f64>,
    /// Joules per bit written.
    pub write_energy: f64,
    pub write_time: WriteTime,
    pub area_um2: f64,
}

impl MemoryTechnology {
    pub fn write_time_s(&self) -> f64 {
        self.write_time.seconds()
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let check = |name, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(DeviceError::NonPositive { name, value: v })
            }
        };
        check("endurance", self.endurance)?;
        check("write_energy", self.write_energy)?;
        check("write_time", self.write_time_s())?;
        check("area_um2", self.area_um2)?;
        if let Some(r) = self.retention {
            check("retention", r)?;
        }
        Ok(())
    }

    fn matches(&self, name: &str) -> bool {
        let norm = |s: &str| s.to_ascii_lowercase().replace([' ', '(', ')', '_', '-'], "");
        let (mine, theirs) = (norm(&self.name), norm(name));
        mine == theirs || (mine == "pcm" && theirs == "pcme")
    }
}

fn tech(
    name: &str,
    endurance: f64,
    retention: Option<f64>,
    write_energy: f64,
    write_time: WriteTime,
    area_um2: f64,
) -> MemoryTechnology {
    MemoryTechnology {
        name: name.to_owned(),
        endurance,
        endurance_is_lower_bound: false,
        retention,
        write_energy,
        write_time,
        area_um2,
    }
}

/// The ten surveyed technologies, DEOAM first.
pub fn registry() -> Vec<MemoryTechnology> {
    use WriteTime::{FromFrequency as Hz, Seconds as S};
    let mut deoam = tech("DEOAM", 8698.0, Some(573.53e-6), 55.97e-12, S(63.3e-9), 10_000.0);
    deoam.endurance_is_lower_bound = true;
    vec![
        deoam,
        tech("DRAM", 10e15, Some(64e-3), 3.97e-12, S(13.75e-9), 0.0023),
        tech("PCM", 2e12, Some(10.0 * YEAR), 2.5e-6, S(500e-12), 0.001),
        tech("OAM", 2e3, Some(DAY), 12.5e-15, Hz(15e6), 2.0),
        tech("FG", 10e6, Some(YEAR), 5.4e-3, S(1.5e-3), 0.00027),
        tech("MEMS (O)", 30.0, None, 10e-6, Hz(4e3), 400.0),
        tech("MEMS (E)", 10e9, None, 1e-12, Hz(100e3), 10_000.0),
        tech("MO", 7.0, None, 33.3e-9, Hz(1e6), 8000.0),
        tech("FE", 300.0, None, 10e-12, Hz(1e6), 20_000.0),
        tech("TC", 30.0, None, 7.5e-12, Hz(1.0), 315.0),
    ]
}

/// Looks up a technology by name, ignoring case, spaces and brackets.
pub fn technology(name: &str) -> Result<MemoryTechnology, DeviceError> {
    registry()
        .into_iter()
        .find(|t| t.matches(name))
        .ok_or_else(|| DeviceError::UnknownTechnology(name.to_owned()))
}

/// The default registry with entries replaced or appended from a JSON list
/// of technologies.
pub fn registry_from_json(json: &str) -> Result<Vec<MemoryTechnology>, DeviceError> {
    let overrides: Vec<MemoryTechnology> = serde_json::from_str(json)?;
    let mut reg = registry();
    for o in overrides {
        o.validate()?;
        match reg.iter_mut().find(|t| t.matches(&o.name)) {
            Some(slot) => *slot = o,
            None => reg.push(o),
        }
    }
    Ok(reg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ten_valid_entries() {
        let reg = registry();
        assert_eq!(reg.len(), 10);
        for t in &reg {
            t.validate().unwrap();
        }
        assert!(reg[0].endurance_is_lower_bound);
        assert_eq!(reg.iter().filter(|t| t.endurance_is_lower_bound).count(), 1);
        let missing: Vec<&str> = reg
            .iter()
            .filter(|t| t.retention.is_none())
            .map(|t| t.name.as_str())
            .collect();
        assert_eq!(missing, ["MEMS (O)", "MEMS (E)", "MO", "FE", "TC"]);
    }

    #[test]
    fn lookups() {
        let pcm = technology("PCM").unwrap();
        assert_eq!(pcm.write_time_s(), 500e-12);
        assert_eq!(pcm.write_energy, 2.5e-6);
        assert_eq!(technology("pcm (e)").unwrap(), pcm);
        assert_eq!(technology("OAM").unwrap().write_energy, 12.5e-15);
        let dram = technology("DRAM").unwrap();
        assert_eq!(dram.endurance, 1e16);
        assert_eq!(dram.retention, Some(64e-3));
        let deoam = technology("deoam").unwrap();
        assert_eq!(deoam.retention, Some(573.53e-6));
        assert_eq!(deoam.write_time_s(), 63.3e-9);
        assert!(matches!(technology("SRAM"), Err(DeviceError::UnknownTechnology(_))));
    }

    #[test]
    fn frequency_rows() {
        let wt = |n| technology(n).unwrap().write_time_s();
        assert_relative_eq!(wt("MEMS (O)"), 125e-6);
        assert_relative_eq!(wt("MEMS (E)"), 5e-6);
        assert_relative_eq!(wt("MO"), 500e-9);
        assert_relative_eq!(wt("FE"), 500e-9);
        assert_relative_eq!(wt("TC"), 500e-3);
        assert!((wt("OAM") - 33.3e-9).abs() < 0.05e-9);
    }

    #[test]
    fn json_override() {
        let json = r#"[{"name":"dram","endurance":1e17,"retention":0.064,
            "write_energy":4e-12,"write_time":{"seconds":1.4e-8},"area_um2":0.0023},
            {"name":"SRAM","endurance":1e18,"retention":null,"write_energy":1e-15,
            "write_time":{"from-frequency":1e9},"area_um2":0.1}]"#;
        let reg = registry_from_json(json).unwrap();
        assert_eq!(reg.len(), 11);
        assert_eq!(reg[1].endurance, 1e17);
        assert_eq!(reg[10].write_time_s(), 0.5e-9);
        assert!(registry_from_json(r#"[{"name":"x","endurance":-1,"retention":null,"write_energy":1,"write_time":{"seconds":1},"area_um2":1}]"#).is_err());
        let round: Vec<MemoryTechnology> =
            serde_json::from_str(&serde_json::to_string(&registry()).unwrap()).unwrap();
        assert_eq!(round, registry());
    }
}
