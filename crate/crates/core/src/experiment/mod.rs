//! Seeded experiment runner: one kind per sweep or report, CSV outputs and a
//! hashed manifest.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::archmodel::ArchError;
use crate::devices::DeviceError;
use crate::nncore::{Mnist, NnError, TrainConfig};

mod config;
mod reports;
mod sweeps;

pub use config::{
    ArchReport, BitsSweep, DataConfig, DeviceFom, ExperimentConfig, MemoryComparison, NoiseSweep,
    PowerScaling, RetentionSweep,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    TrainBaseline,
    SweepBits,
    SweepNoise,
    SweepRetention,
    CompareMemories,
    PowerScaling,
    DeviceFom,
    ArchReport,
}

impl Kind {
    pub const ALL: [Kind; 8] = [
        Kind::TrainBaseline,
        Kind::SweepBits,
        Kind::SweepNoise,
        Kind::SweepRetention,
        Kind::CompareMemories,
        Kind::PowerScaling,
        Kind::DeviceFom,
        Kind::ArchReport,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::TrainBaseline => "train-baseline",
            Kind::SweepBits => "sweep-bits",
            Kind::SweepNoise => "sweep-noise",
            Kind::SweepRetention => "sweep-retention",
            Kind::CompareMemories => "compare-memories",
            Kind::PowerScaling => "power-scaling",
            Kind::DeviceFom => "device-fom",
            Kind::ArchReport => "arch-report",
        }
    }

    pub fn needs_dataset(&self) -> bool {
        matches!(
            self,
            Kind::TrainBaseline | Kind::SweepBits | Kind::SweepNoise | Kind::SweepRetention
        )
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("dataset: {0}")]
    Dataset(NnError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Arch(#[from] ArchError),
    #[error("non-finite metric {0}")]
    NonFinite(String),
    #[error("no crossing of {level} in range")]
    NoCrossing { level: f64 },
    #[error("curve already below {level} at the first grid point")]
    DegradedAtStart { level: f64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

impl ExperimentError {
    /// Short stable tag for the machine-readable error line.
    pub fn code(&self) -> &'static str {
        match self {
            ExperimentError::Config(_) => "config",
            ExperimentError::Dataset(_) => "dataset",
            ExperimentError::Nn(_) => "training",
            ExperimentError::Device(_) => "device",
            ExperimentError::Arch(_) => "arch",
            ExperimentError::NonFinite(_) => "non-finite",
            ExperimentError::NoCrossing { .. } | ExperimentError::DegradedAtStart { .. } => "threshold",
            ExperimentError::Io { .. } => "io",
            ExperimentError::Csv(_) => "csv",
            ExperimentError::Json(_) => "json",
            ExperimentError::Pool(_) => "pool",
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Header plus string rows, written as CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Rows whose `key` column equals `value`.
    pub fn filter<'a>(&'a self, key: &str, value: &'a str) -> impl Iterator<Item = &'a Vec<String>> + 'a {
        let col = self.column(key);
        self.rows
            .iter()
            .filter(move |r| col.is_some_and(|c| r[c] == value))
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, ExperimentError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| ExperimentError::Csv(e.into_error().into()))
    }
}

/// Summary rows share one schema across kinds.
pub fn summary_table() -> Table {
    Table::new(&["metric", "condition", "value", "std", "replicates"])
}

/// Looks up `value` in a summary table.
pub fn summary_value(summary: &Table, metric: &str, condition: &str) -> Option<String> {
    summary
        .rows
        .iter()
        .find(|r| r[0] == metric && r[1] == condition)
        .map(|r| r[2].clone())
}

pub(crate) fn summary_row(t: &mut Table, metric: &str, condition: &str, value: impl ToString, std: Option<f64>, n: usize) {
    t.push(vec![
        metric.to_string(),
        condition.to_string(),
        value.to_string(),
        std.map(|s| s.to_string()).unwrap_or_default(),
        n.to_string(),
    ]);
}

/// Everything one run produces, before it is written out.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub results: Table,
    pub summary: Table,
    /// Additional files (name, bytes), e.g. synthesized traces.
    pub extra: Vec<(String, Vec<u8>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub pwbsim_version: String,
    pub kind: Kind,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub files: Vec<ManifestEntry>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for stream `index` under `master`.
pub fn point_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

/// Training seed shared by every grid point of one replicate.
pub(crate) fn replicate_seed(master: u64, replicate: usize) -> u64 {
    point_seed(master, replicate as u64)
}

/// Seed of the evaluation noise at one grid point.
pub(crate) fn eval_seed(master: u64, point: usize) -> u64 {
    point_seed(master, (1 << 32) + point as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scan {
    /// Accuracy falls as the parameter grows (noise level).
    Ascending,
    /// Accuracy falls as the parameter shrinks (retention ratio).
    Descending,
}

/// Parameter where the curve first falls below `(1 - degradation) *
/// baseline`, linearly interpolated between the bracketing grid points.
/// `curve` is sorted by parameter.
pub fn threshold_finder(
    curve: &[(f64, f64)],
    baseline: f64,
    degradation: f64,
    scan: Scan,
) -> Result<f64, ExperimentError> {
    let level = (1.0 - degradation) * baseline;
    let ordered: Vec<(f64, f64)> = match scan {
        Scan::Ascending => curve.to_vec(),
        Scan::Descending => curve.iter().rev().copied().collect(),
    };
    let first = ordered.iter().position(|&(_, a)| a < level);
    match first {
        None => Err(ExperimentError::NoCrossing { level }),
        Some(0) => Err(ExperimentError::DegradedAtStart { level }),
        Some(i) => {
            let (p0, a0) = ordered[i - 1];
            let (p1, a1) = ordered[i];
            Ok(p0 + (a0 - level) / (a0 - a1) * (p1 - p0))
        }
    }
}

pub(crate) fn mean_std(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}

pub(crate) fn finite(name: &str, v: f64) -> Result<f64, ExperimentError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ExperimentError::NonFinite(format!("{name} = {v}")))
    }
}

/// Shared inputs for the training kinds.
pub(crate) struct Env<'a> {
    pub cfg: &'a ExperimentConfig,
    pub mnist: Option<&'a Mnist>,
}

impl Env<'_> {
    pub fn mnist(&self) -> &Mnist {
        self.mnist.expect("dataset loaded for training kinds")
    }

    pub fn train_cfg(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            ..self.cfg.train.clone()
        }
    }
}

/// Runs `f` over `items` on the current pool, keeping input order.
pub(crate) fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.par_iter().map(f).collect()
}

pub fn load_dataset(data: &DataConfig) -> Result<Mnist, ExperimentError> {
    let mut m = Mnist::load(&data.dir, data.verify_sha256).map_err(ExperimentError::Dataset)?;
    let head = |n: Option<usize>, len: usize| -> Option<Vec<usize>> { n.filter(|&n| n < len).map(|n| (0..n).collect()) };
    if let Some(idx) = head(data.train_limit, m.train.len()) {
        m.train = m.train.select(&idx);
    }
    if let Some(idx) = head(data.test_limit, m.test.len()) {
        m.test = m.test.select(&idx);
    }
    Ok(match data.binarize_threshold {
        Some(t) => m.binarize(t),
        None => m,
    })
}

/// Runs the configured experiment in memory. `jobs` bounds the worker
/// threads; 0 uses rayon's default.
pub fn run(cfg: &ExperimentConfig, jobs: usize) -> Result<SweepResult, ExperimentError> {
    cfg.validate()?;
    let mnist = if cfg.kind.needs_dataset() {
        Some(load_dataset(&cfg.data)?)
    } else {
        None
    };
    run_with(cfg, mnist.as_ref(), jobs)
}

/// As [`run`], with a preloaded dataset for the training kinds.
pub fn run_with(cfg: &ExperimentConfig, mnist: Option<&Mnist>, jobs: usize) -> Result<SweepResult, ExperimentError> {
    cfg.validate()?;
    if cfg.kind.needs_dataset() && mnist.is_none() {
        return Err(ExperimentError::Config(format!(
            "{} needs the dataset",
            cfg.kind.as_str()
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    let env = Env { cfg, mnist };
    pool.install(|| match cfg.kind {
        Kind::TrainBaseline => sweeps::train_baseline(&env),
        Kind::SweepBits => sweeps::sweep_bits(&env),
        Kind::SweepNoise => sweeps::sweep_noise(&env),
        Kind::SweepRetention => sweeps::sweep_retention(&env),
        Kind::CompareMemories => reports::compare_memories(cfg),
        Kind::PowerScaling => reports::power_scaling(cfg),
        Kind::DeviceFom => reports::device_fom(cfg),
        Kind::ArchReport => reports::arch_report(cfg),
    })
}

/// Writes results.csv, summary.csv, any extra files and manifest.json.
pub fn write_outputs(cfg: &ExperimentConfig, result: &SweepResult, out: &Path) -> Result<Manifest, ExperimentError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut files = vec![
        ("results.csv".to_string(), result.results.to_csv()?),
        ("summary.csv".to_string(), result.summary.to_csv()?),
    ];
    files.extend(result.extra.iter().cloned());
    let mut entries = Vec::new();
    for (name, bytes) in &files {
        let path = out.join(name);
        fs::write(&path, bytes).map_err(io_err(&path))?;
        entries.push(ManifestEntry {
            file: name.clone(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
    }
    let manifest = Manifest {
        pwbsim_version: env!("CARGO_PKG_VERSION").to_string(),
        kind: cfg.kind,
        seed: cfg.seed,
        config: cfg.clone(),
        files: entries,
    };
    let path = out.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(manifest)
}

/// Checks every manifest entry against the file on disk.
pub fn verify_manifest(out: &Path) -> Result<Manifest, ExperimentError> {
    let path = out.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    for e in &manifest.files {
        let p = out.join(&e.file);
        let bytes = fs::read(&p).map_err(io_err(&p))?;
        let digest = hex::encode(Sha256::digest(&bytes));
        if digest != e.sha256 {
            return Err(ExperimentError::Config(format!(
                "{}: sha256 {digest} does not match manifest {}",
                e.file, e.sha256
            )));
        }
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn threshold_examples() {
        let flat = [(1.0, 0.96), (2.0, 0.96), (3.0, 0.96)];
        assert!(matches!(
            threshold_finder(&flat, 0.96, 0.1, Scan::Ascending),
            Err(ExperimentError::NoCrossing { .. })
        ));
        // level 0.864: 50 + (0.864 - 0.80) / 0.16 * 150
        let r = threshold_finder(&[(50.0, 0.80), (200.0, 0.96)], 0.96, 0.1, Scan::Descending).unwrap();
        assert!((r - 110.0).abs() < 1e-9, "{r}");
        let step = [(0.0, 0.9), (1.0, 0.9), (1.0, 0.1), (2.0, 0.1)];
        assert_eq!(threshold_finder(&step, 0.9, 0.1, Scan::Ascending).unwrap(), 1.0);
        assert!(matches!(
            threshold_finder(&[(1.0, 0.1), (2.0, 0.9)], 0.9, 0.1, Scan::Ascending),
            Err(ExperimentError::DegradedAtStart { .. })
        ));
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a: Vec<u64> = (0..100).map(|i| point_seed(42, i)).collect();
        let mut s = a.clone();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 100);
        assert_eq!(point_seed(42, 7), point_seed(42, 7));
        assert_ne!(point_seed(42, 7), point_seed(43, 7));
    }

    #[test]
    fn stats() {
        assert_eq!(mean_std(&[1.0]), (1.0, None));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s.unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn table_csv() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), "x,y".into()]);
        assert_eq!(String::from_utf8(t.to_csv().unwrap()).unwrap(), "a,b\n1,\"x,y\"\n");
        assert_eq!(t.filter("a", "1").count(), 1);
    }

    proptest! {
        #[test]
        fn threshold_inside_bracket(a0 in 0.9f64..1.0, a1 in 0.0f64..0.8, p0 in 0.0f64..10.0, dp in 0.1f64..10.0) {
            let curve = [(p0, a0), (p0 + dp, a1)];
            let t = threshold_finder(&curve, a0, 0.1, Scan::Ascending).unwrap();
            prop_assert!(t >= p0 && t <= p0 + dp);
        }
    }
}
