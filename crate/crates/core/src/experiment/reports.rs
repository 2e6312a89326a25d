use super::{summary_row, summary_table, ExperimentConfig, ExperimentError, SweepResult, Table};
use crate::archmodel::{
    crossover_n, map_network, max_rings, power_sweep, rankings, table_summary, training_cost, weight_updates,
};
use crate::devices::{
    extract_10_90, extract_time_constant, finesse, synth_retention_trace, synth_retention_voltage, synth_write_trace,
    technology, write_energy_from_leakage, write_time_from_frequency, Measured,
};

fn s(v: impl ToString) -> String {
    v.to_string()
}

pub fn compare_memories(cfg: &ExperimentConfig) -> Result<SweepResult, ExperimentError> {
    let m = &cfg.memories;
    let arch = map_network(&m.layer_dims, m.mrrs_per_bank, None)?;
    let mut results = Table::new(&[
        "technology",
        "batch_size",
        "updates",
        "training_time_s",
        "energy_per_cell_j",
        "memory_energy_j",
        "endurance",
        "endurance_is_lower_bound",
        "endurance_margin",
        "red_zone",
        "retention_s",
        "missing",
    ]);
    let mut summary = summary_table();
    for &b in &m.batch_sizes {
        let updates = weight_updates(m.dataset_size, b, m.epochs)?;
        let reports: Vec<_> = m
            .technologies
            .iter()
            .map(|t| training_cost(updates, t, &arch, &m.power_table))
            .collect();
        for r in &reports {
            results.push(vec![
                r.technology.clone(),
                s(b),
                s(r.updates),
                s(r.training_time),
                s(r.energy_per_cell),
                s(r.memory_energy),
                s(r.endurance),
                s(r.endurance_is_lower_bound),
                s(r.endurance_margin),
                s(r.fails_before_training_completes),
                r.retention.map(s).unwrap_or_default(),
                r.missing.join(";"),
            ]);
        }
        let cond = format!("batch={b}");
        summary_row(&mut summary, "updates", &cond, updates, None, 1);
        if let Some(rk) = rankings(&reports) {
            summary_row(&mut summary, "fastest_training", &cond, rk.fastest, None, 1);
            summary_row(&mut summary, "lowest_write_energy", &cond, rk.lowest_write_energy, None, 1);
            summary_row(&mut summary, "largest_endurance_margin", &cond, rk.most_endurance, None, 1);
        }
        let red: Vec<&str> = reports
            .iter()
            .filter(|r| r.fails_before_training_completes)
            .map(|r| r.technology.as_str())
            .collect();
        summary_row(&mut summary, "red_zone", &cond, red.join(";"), None, 1);
    }
    Ok(SweepResult {
        results,
        summary,
        extra: Vec::new(),
    })
}

pub fn power_scaling(cfg: &ExperimentConfig) -> Result<SweepResult, ExperimentError> {
    let p = &cfg.power.params;
    let mut results = Table::new(&["n", "p_sram_dac_w", "p_deoam_w", "dacs_sram_dac", "dacs_deoam", "deoam_saving_w"]);
    for row in power_sweep(p, &cfg.power.n_values) {
        results.push(vec![
            s(row.n),
            s(row.p_sram_dac),
            s(row.p_deoam),
            s(row.dacs_sram_dac),
            s(row.dacs_deoam),
            s(row.p_sram_dac - row.p_deoam),
        ]);
    }
    let mut summary = summary_table();
    summary_row(&mut summary, "cell_dynamic_power_w", "", p.cell_dynamic_power(), None, 1);
    match crossover_n(p) {
        Ok(n) => summary_row(&mut summary, "crossover_n", "", n, None, 1),
        Err(e) => summary_row(&mut summary, "crossover_n", "", format!("none: {e}"), None, 1),
    }
    Ok(SweepResult {
        results,
        summary,
        extra: Vec::new(),
    })
}

pub fn device_fom(cfg: &ExperimentConfig) -> Result<SweepResult, ExperimentError> {
    let d = &cfg.devices;
    let mut results = Table::new(&["metric", "value", "unit", "measured_min", "measured_nominal", "measured_max"]);
    let mut push = |metric: &str, value: f64, unit: &str, m: Option<Measured>| {
        let (lo, nom, hi) = match m {
            Some(m) => (s(m.min), m.nominal.map(s).unwrap_or_default(), s(m.max)),
            None => Default::default(),
        };
        results.push(vec![metric.into(), s(value), unit.into(), lo, nom, hi]);
    };
    let f = finesse(d.optics.fsr_nm, d.optics.fwhm_nm)?;
    push("finesse", f, "", None);
    push("compute_time", d.optics.compute_time(), "s", Some(d.deoam.compute_time));
    push("cv2_write_energy", d.deoam.cv2_energy(), "J", Some(d.deoam.write_energy));
    for &hz in &d.frequencies {
        push(&format!("write_time@{hz}Hz"), write_time_from_frequency(hz)?, "s", None);
    }

    let mut extra = Vec::new();
    let optical = synth_retention_trace(
        d.deoam.c_mem,
        &d.leakage,
        d.retention_v0,
        &d.optics,
        d.retention_duration,
        d.retention_dt,
    )?;
    let volts = synth_retention_voltage(d.deoam.c_mem, &d.leakage, d.retention_v0, d.retention_duration, d.retention_dt)?;
    push("tau_ret_optical", extract_time_constant(&optical)?, "s", Some(d.deoam.tau_ret));
    push("t_ret_10_90_optical", extract_10_90(&optical)?, "s", Some(d.deoam.t_ret_10_90));
    push("tau_ret_electrical", extract_time_constant(&volts)?, "s", None);

    let r = d.deoam.drive_resistance();
    let write = synth_write_trace(r, d.deoam.c_mem, 0.0, d.retention_v0, d.write_duration, d.write_dt)?;
    push("tau_rise", extract_time_constant(&write)?, "s", Some(d.deoam.tau_rise));
    push("t_rise_10_90", extract_10_90(&write)?, "s", Some(d.deoam.t_rise_10_90));
    push("retention_leakage_energy", write_energy_from_leakage(&volts, &d.leakage)?, "J", None);

    if d.write_traces {
        extra.push(("retention_trace.csv".to_string(), optical.to_csv()?));
        extra.push(("write_trace.csv".to_string(), write.to_csv()?));
    }

    let mut summary = summary_table();
    for row in &results.rows {
        if row[3].is_empty() {
            continue;
        }
        let v: f64 = row[1].parse().unwrap_or(f64::NAN);
        let (lo, hi): (f64, f64) = (row[3].parse().unwrap_or(f64::NAN), row[5].parse().unwrap_or(f64::NAN));
        summary_row(&mut summary, "within_measured_range", &row[0], lo <= v && v <= hi, None, 1);
    }
    Ok(SweepResult { results, summary, extra })
}

pub fn arch_report(cfg: &ExperimentConfig) -> Result<SweepResult, ExperimentError> {
    let a = &cfg.arch;
    let limit = a.finesse.map(|f| max_rings(f, a.spacing_factor));
    let arch = map_network(&a.layer_dims, a.mrrs_per_bank, limit)?;
    let tech = technology(&a.technology)?;
    let updates = weight_updates(a.dataset_size, a.batch_size, a.epochs)?;
    let report = training_cost(updates, &tech, &arch, &a.power_table);

    let mut results = Table::new(&[
        "group",
        "count",
        "power_min_w",
        "power_max_w",
        "energy_per_device_min_j",
        "energy_per_device_max_j",
        "total_min_j",
        "total_max_j",
    ]);
    for g in &report.breakdown {
        let (pl, ph) = g.power_per_device.map(|p| (s(p.min), s(p.max))).unwrap_or_default();
        results.push(vec![
            g.group.clone(),
            s(g.count),
            pl,
            ph,
            s(g.energy_per_device.min),
            s(g.energy_per_device.max),
            s(g.total_energy.min),
            s(g.total_energy.max),
        ]);
    }
    let mut summary = summary_table();
    if let Some(l) = limit {
        summary_row(&mut summary, "max_rings", "", l, None, 1);
    }
    for (k, v) in [
        ("cores", arch.cores),
        ("rows_per_core", arch.rows_per_core),
        ("lasers", arch.lasers),
        ("soas", arch.soas),
        ("pds", arch.pds),
        ("tias", arch.tias),
        ("modulators", arch.modulators),
        ("thermal_stabilizers", arch.thermal_stabilizers),
        ("memory_cells", arch.memory_cells),
    ] {
        summary_row(&mut summary, k, "", v, None, 1);
    }
    summary_row(&mut summary, "updates", "", updates, None, 1);
    summary_row(&mut summary, "training_time_s", &report.technology, report.training_time, None, 1);
    summary_row(&mut summary, "memory_energy_j", &report.technology, report.memory_energy, None, 1);
    summary_row(&mut summary, "endurance_margin", &report.technology, report.endurance_margin, None, 1);
    let total = report.total_energy();
    summary_row(&mut summary, "total_energy_min_j", "", total.min, None, 1);
    summary_row(&mut summary, "total_energy_max_j", "", total.max, None, 1);
    Ok(SweepResult {
        results,
        summary,
        extra: vec![("report.txt".into(), table_summary(&report).into_bytes())],
    })
}
