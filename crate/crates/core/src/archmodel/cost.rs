use serde::{Deserialize, Serialize};

use super::ArchitectureSpec;
use crate::devices::MemoryTechnology;

/// Closed range carried through the energy accounting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub const fn point(v: f64) -> Self {
        Self { min: v, max: v }
    }

    pub fn scale(self, k: f64) -> Self {
        Self::new(self.min * k, self.max * k)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.min <= v && v <= self.max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum PowerSpec {
    /// Watts drawn for the whole training time.
    AveragePower(Interval),
    /// Joules per device per weight update.
    PerEvent(Interval),
}

/// Device-group power figures. The memory group comes from the
/// technology under test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DevicePowerTable {
    pub laser: PowerSpec,
    pub soa: PowerSpec,
    pub pd_tia: PowerSpec,
    pub modulator: PowerSpec,
    pub thermal: PowerSpec,
}

impl Default for DevicePowerTable {
    fn default() -> Self {
        Self {
            laser: PowerSpec::AveragePower(Interval::new(0.1, 1.0)),
            soa: PowerSpec::AveragePower(Interval::new(0.3, 1.0)),
            pd_tia: PowerSpec::AveragePower(Interval::point(37e-3)),
            modulator: PowerSpec::PerEvent(Interval::new(40e-15, 1e-12)),
            // "< 30 mW"
            thermal: PowerSpec::AveragePower(Interval::new(0.0, 30e-3)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEnergy {
    pub group: String,
    pub count: usize,
    /// Per-device average power in watts, when the group is power-rated.
    pub power_per_device: Option<Interval>,
    pub energy_per_device: Interval,
    pub total_energy: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingCostReport {
    pub technology: String,
    pub updates: u64,
    pub training_time: f64,
    pub energy_per_cell: f64,
    pub memory_energy: f64,
    pub memory_cells: usize,
    pub endurance: f64,
    pub endurance_is_lower_bound: bool,
    pub endurance_margin: f64,
    pub fails_before_training_completes: bool,
    pub retention: Option<f64>,
    /// Figures of merit the technology does not report.
    pub missing: Vec<String>,
    pub breakdown: Vec<GroupEnergy>,
}

impl TrainingCostReport {
    pub fn group(&self, name: &str) -> Option<&GroupEnergy> {
        self.breakdown.iter().find(|g| g.group == name)
    }

    pub fn total_energy(&self) -> Interval {
        self.breakdown.iter().fold(Interval::point(0.0), |acc, g| {
            Interval::new(acc.min + g.total_energy.min, acc.max + g.total_energy.max)
        })
    }
}

fn group(name: &str, count: usize, spec: PowerSpec, time: f64, updates: u64) -> GroupEnergy {
    let (power, per_device) = match spec {
        PowerSpec::AveragePower(p) => (Some(p), p.scale(time)),
        PowerSpec::PerEvent(e) => (None, e.scale(updates as f64)),
    };
    GroupEnergy {
        group: name.to_string(),
        count,
        power_per_device: power,
        energy_per_device: per_device,
        total_energy: per_device.scale(count as f64),
    }
}

pub fn training_cost(
    updates: u64,
    tech: &MemoryTechnology,
    arch: &ArchitectureSpec,
    table: &DevicePowerTable,
) -> TrainingCostReport {
    let t_write = tech.write_time_s();
    let time = updates as f64 * t_write;
    let per_cell = updates as f64 * tech.write_energy;
    let margin = tech.endurance / updates as f64;
    let mut missing = Vec::new();
    if tech.retention.is_none() {
        missing.push("retention".to_string());
    }
    let memory = GroupEnergy {
        group: "memory".to_string(),
        count: arch.memory_cells,
        power_per_device: (t_write > 0.0).then(|| Interval::point(tech.write_energy / t_write)),
        energy_per_device: Interval::point(per_cell),
        total_energy: Interval::point(per_cell * arch.memory_cells as f64),
    };
    // One TIA per balanced photodiode pair; the pair is one device here.
    let breakdown = vec![
        group("laser", arch.lasers, table.laser, time, updates),
        group("soa", arch.soas, table.soa, time, updates),
        memory,
        group("pd_tia", arch.tias, table.pd_tia, time, updates),
        group("modulator", arch.modulators, table.modulator, time, updates),
        group("thermal", arch.thermal_stabilizers, table.thermal, time, updates),
    ];
    TrainingCostReport {
        technology: tech.name.clone(),
        updates,
        training_time: time,
        energy_per_cell: per_cell,
        memory_energy: per_cell * arch.memory_cells as f64,
        memory_cells: arch.memory_cells,
        endurance: tech.endurance,
        endurance_is_lower_bound: tech.endurance_is_lower_bound,
        endurance_margin: margin,
        fails_before_training_completes: margin < 1.0,
        retention: tech.retention,
        missing,
        breakdown,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rankings {
    pub fastest: String,
    pub lowest_write_energy: String,
    pub most_endurance: String,
}

pub fn rankings(reports: &[TrainingCostReport]) -> Option<Rankings> {
    let best = |key: &dyn Fn(&TrainingCostReport) -> f64| {
        reports
            .iter()
            .min_by(|a, b| key(a).total_cmp(&key(b)))
            .map(|r| r.technology.clone())
    };
    Some(Rankings {
        fastest: best(&|r| r.training_time)?,
        lowest_write_energy: best(&|r| r.energy_per_cell)?,
        most_endurance: best(&|r| -r.endurance_margin)?,
    })
}

/// One CSV row per technology.
pub fn report_csv(reports: &[TrainingCostReport]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "technology",
        "updates",
        "training_time_s",
        "energy_per_cell_j",
        "memory_energy_j",
        "endurance",
        "endurance_margin",
        "red_zone",
        "retention_s",
        "total_energy_min_j",
        "total_energy_max_j",
    ])?;
    for r in reports {
        let total = r.total_energy();
        w.write_record([
            r.technology.clone(),
            r.updates.to_string(),
            r.training_time.to_string(),
            r.energy_per_cell.to_string(),
            r.memory_energy.to_string(),
            r.endurance.to_string(),
            r.endurance_margin.to_string(),
            r.fails_before_training_completes.to_string(),
            r.retention.map(|v| v.to_string()).unwrap_or_default(),
            total.min.to_string(),
            total.max.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn range(i: Interval, unit: f64) -> String {
    let (a, b) = (i.min / unit, i.max / unit);
    if a == b {
        format!("{a:.4}")
    } else {
        format!("{a:.4} - {b:.4}")
    }
}

/// Text table with one column per device group, rows as in the training
/// energy table: power per device (mW), energy per device (uJ), count,
/// total (uJ).
pub fn table_summary(report: &TrainingCostReport) -> String {
    let mut out = format!(
        "{} training: {} updates, {:.4} us\n",
        report.technology,
        report.updates,
        report.training_time * 1e6
    );
    let names: Vec<&str> = report.breakdown.iter().map(|g| g.group.as_str()).collect();
    out += &format!("{:<28}{}\n", "group", names.iter().map(|n| format!("{n:>26}")).collect::<String>());
    let row = |label: &str, f: &dyn Fn(&GroupEnergy) -> String| {
        format!(
            "{:<28}{}\n",
            label,
            report.breakdown.iter().map(|g| format!("{:>26}", f(g))).collect::<String>()
        )
    };
    out += &row("power per device (mW)", &|g| {
        g.power_per_device.map(|p| range(p, 1e-3)).unwrap_or_else(|| "-".into())
    });
    out += &row("energy per device (uJ)", &|g| range(g.energy_per_device, 1e-6));
    out += &row("devices", &|g| g.count.to_string());
    out += &row("total energy (uJ)", &|g| range(g.total_energy, 1e-6));
    if report.fails_before_training_completes {
        out += &format!(
            "endurance margin {:.3}: fails before training completes\n",
            report.endurance_margin
        );
    }
    for m in &report.missing {
        out += &format!("missing: {m}\n");
    }
    out
}
