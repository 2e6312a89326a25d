//! Photonic architecture mapping, the SRAM-DAC vs DEOAM power-scaling model
//! and per-technology training cost reports.

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod cost;
mod power;

pub use cost::{
    rankings, report_csv, table_summary, training_cost, DevicePowerTable, GroupEnergy, Interval,
    PowerSpec, Rankings, TrainingCostReport,
};
pub use power::{crossover_n, dac_count, p_deoam, p_sram_dac, power_sweep, MemoryArch, PowerModelParams, PowerRow};

#[derive(Debug, Error, PartialEq)]
pub enum ArchError {
    #[error("{name} must be >= 1")]
    Zero { name: &'static str },
    #[error("network needs at least two layer widths, got {0}")]
    TooFewLayers(usize),
    #[error("{mrrs} MRRs per bank exceeds the {limit}-ring finesse limit")]
    BankTooLarge { mrrs: usize, limit: usize },
    #[error("invalid power model: {0}")]
    BadParams(String),
    #[error("no crossover: DEOAM never draws less than SRAM-DAC")]
    NoCrossover,
}

/// Channel spacing in linewidths implied by a finesse-368 ring holding 108
/// channels.
pub const DEFAULT_SPACING_FACTOR: f64 = 368.0 / 108.0;

/// `floor(finesse / spacing_factor)` wavelength channels per FSR.
pub fn max_rings(finesse: f64, spacing_factor: f64) -> usize {
    if !(spacing_factor > 0.0) || !(finesse > 0.0) {
        return 0;
    }
    // The quotient of the defining pair lands a few ulps under 108.
    (finesse / spacing_factor + 1e-9).floor() as usize
}

/// Device counts for a network mapped onto banks of `mrrs_per_bank` rings.
/// Counts describe the first (widest) stage, which sets the hardware;
/// `stage_cores` lists the cores each layer would need.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub cores: usize,
    pub rows_per_core: usize,
    pub mrrs_per_bank: usize,
    pub wavelengths_per_core: usize,
    pub lasers: usize,
    pub soas: usize,
    /// Balanced detection: two photodiodes per row.
    pub pds: usize,
    pub tias: usize,
    pub modulators: usize,
    pub thermal_stabilizers: usize,
    pub memory_cells: usize,
    pub stage_cores: Vec<usize>,
}

/// Maps `layer_dims` (input width first) onto the architecture.
pub fn map_network(
    layer_dims: &[usize],
    mrrs_per_bank: usize,
    ring_limit: Option<usize>,
) -> Result<ArchitectureSpec, ArchError> {
    if layer_dims.len() < 2 {
        return Err(ArchError::TooFewLayers(layer_dims.len()));
    }
    if mrrs_per_bank == 0 {
        return Err(ArchError::Zero { name: "mrrs_per_bank" });
    }
    if layer_dims.contains(&0) {
        return Err(ArchError::Zero { name: "layer width" });
    }
    if let Some(limit) = ring_limit {
        if mrrs_per_bank > limit {
            return Err(ArchError::BankTooLarge {
                mrrs: mrrs_per_bank,
                limit,
            });
        }
    }
    let stage_cores: Vec<usize> = layer_dims[..layer_dims.len() - 1]
        .iter()
        .map(|w| w.div_ceil(mrrs_per_bank))
        .collect();
    let cores = stage_cores[0];
    let rows = layer_dims[1];
    let cells = rows * mrrs_per_bank * cores;
    Ok(ArchitectureSpec {
        cores,
        rows_per_core: rows,
        mrrs_per_bank,
        wavelengths_per_core: mrrs_per_bank,
        lasers: cores,
        soas: rows * cores,
        pds: 2 * rows * cores,
        tias: rows * cores,
        modulators: mrrs_per_bank * cores,
        thermal_stabilizers: cells + cores,
        memory_cells: cells,
        stage_cores,
    })
}

/// Writes to every cell: `epochs * ceil(dataset_size / batch_size)`.
pub fn weight_updates(dataset_size: u64, batch_size: u64, epochs: u64) -> Result<u64, ArchError> {
    for (name, v) in [
        ("dataset_size", dataset_size),
        ("batch_size", batch_size),
        ("epochs", epochs),
    ] {
        if v == 0 {
            return Err(ArchError::Zero { name });
        }
    }
    Ok(epochs * dataset_size.div_ceil(batch_size))
}
