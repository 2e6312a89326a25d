//! Python module `pwbsim`: device figures of merit, the cost models, an MLP
//! with the non-ideal forward pass, and the experiment runner.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ::pwbsim::archmodel;
use ::pwbsim::devices;
use ::pwbsim::experiment::{self, ExperimentConfig, Kind};
use ::pwbsim::nncore::{self, Ideal};
use ::pwbsim::nonideal::{self, NonIdealContext, NonIdealityConfig, QuantMode, QuantizerConfig};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_kind(kind: &str) -> PyResult<Kind> {
    Kind::ALL
        .into_iter()
        .find(|k| k.as_str() == kind)
        .ok_or_else(|| err(format!("unknown experiment kind {kind:?}")))
}

/// Serializes through JSON into plain Python objects.
fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyfunction]
fn finesse(fsr_nm: f64, fwhm_nm: f64) -> PyResult<f64> {
    devices::finesse(fsr_nm, fwhm_nm).map_err(err)
}

/// Compute time (s) of the default ring and path, or with overrides.
#[pyfunction]
#[pyo3(signature = (path_length_m=None, group_index=None))]
fn compute_time(path_length_m: Option<f64>, group_index: Option<f64>) -> f64 {
    let mut o = devices::OpticalParams::default();
    if let Some(l) = path_length_m {
        o.path_length_m = l;
    }
    if let Some(n) = group_index {
        o.group_index = n;
    }
    o.compute_time()
}

#[pyfunction]
fn write_time_from_frequency(hz: f64) -> PyResult<f64> {
    devices::write_time_from_frequency(hz).map_err(err)
}

#[pyfunction]
fn technologies(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &devices::registry())
}

#[pyfunction]
fn max_rings(finesse: f64) -> usize {
    archmodel::max_rings(finesse, archmodel::DEFAULT_SPACING_FACTOR)
}

#[pyfunction]
#[pyo3(signature = (layer_dims, mrrs_per_bank=80))]
fn map_network(py: Python<'_>, layer_dims: Vec<usize>, mrrs_per_bank: usize) -> PyResult<Bound<'_, PyAny>> {
    let arch = archmodel::map_network(&layer_dims, mrrs_per_bank, None).map_err(err)?;
    to_py(py, &arch)
}

#[pyfunction]
fn weight_updates(dataset_size: u64, batch_size: u64, epochs: u64) -> PyResult<u64> {
    archmodel::weight_updates(dataset_size, batch_size, epochs).map_err(err)
}

/// Training cost report for a named technology on the MNIST mapping.
#[pyfunction]
#[pyo3(signature = (technology, updates, layer_dims=vec![784, 50, 10], mrrs_per_bank=80))]
fn training_cost<'py>(
    py: Python<'py>,
    technology: &str,
    updates: u64,
    layer_dims: Vec<usize>,
    mrrs_per_bank: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let tech = devices::technology(technology).map_err(err)?;
    let arch = archmodel::map_network(&layer_dims, mrrs_per_bank, None).map_err(err)?;
    let report = archmodel::training_cost(updates, &tech, &arch, &archmodel::DevicePowerTable::default());
    to_py(py, &report)
}

/// `(p_sram_dac, p_deoam)` in watts for an `n x n` array, default params.
#[pyfunction]
fn array_power(n: u64) -> (f64, f64) {
    let p = archmodel::PowerModelParams::default();
    (archmodel::p_sram_dac(&p, n), archmodel::p_deoam(&p, n))
}

#[pyfunction]
fn crossover_n() -> PyResult<u64> {
    archmodel::crossover_n(&archmodel::PowerModelParams::default()).map_err(err)
}

#[pyfunction]
fn decayed_weight(w0: f64, k: u64, ratio: f64) -> f64 {
    let cfg = nonideal::DecayConfig::from_ratio(ratio, nonideal::RefreshPolicy::Never, false);
    nonideal::decayed_weight(w0, k, &cfg)
}

#[pyfunction]
#[pyo3(signature = (w, bits, w_max=0.5))]
fn quantize(w: f64, bits: u32, w_max: f64) -> PyResult<f64> {
    let cfg = QuantizerConfig {
        bits: Some(bits),
        mode: QuantMode::InferenceOnly,
        w_max,
    };
    cfg.validate().map_err(err)?;
    Ok(cfg.quantize(w))
}

/// Multilayer perceptron with sigmoid hidden layers and a log-softmax
/// output.
#[pyclass(name = "Mlp", module = "pwbsim")]
struct PyMlp {
    inner: nncore::Mlp,
}

#[pymethods]
impl PyMlp {
    #[new]
    #[pyo3(signature = (dims, seed=42))]
    fn new(dims: Vec<usize>, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: nncore::Mlp::new(&dims, seed).map_err(err)?,
        })
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.dims()
    }

    /// Row-major `(outputs, inputs)` weights of layer `i`.
    fn weights(&self, i: usize) -> PyResult<Vec<f64>> {
        self.inner
            .layers()
            .get(i)
            .map(|l| l.weights.clone())
            .ok_or_else(|| err(format!("no layer {i}")))
    }

    /// Log-probabilities for one input under the ideal context.
    fn forward(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.forward(&x, &mut Ideal).map_err(err)
    }

    /// Forward pass with a JSON `NonIdealityConfig` (inference phase).
    #[pyo3(signature = (x, config_json="{}", seed=0))]
    fn forward_nonideal(&self, x: Vec<f64>, config_json: &str, seed: u64) -> PyResult<Vec<f64>> {
        let cfg: NonIdealityConfig = serde_json::from_str(config_json).map_err(err)?;
        cfg.validate().map_err(err)?;
        let mut ctx = NonIdealContext::inference(cfg, 1, seed);
        self.inner.forward(&x, &mut ctx).map_err(err)
    }

    /// Trains a fresh network on MNIST in `data_dir` and returns it with
    /// its test accuracy.
    #[staticmethod]
    #[pyo3(signature = (data_dir, epochs=1, batch_size=64, seed=42))]
    fn train_mnist(data_dir: PathBuf, epochs: usize, batch_size: usize, seed: u64) -> PyResult<(Self, f64)> {
        let data = experiment::DataConfig {
            dir: data_dir,
            ..Default::default()
        };
        let m = experiment::load_dataset(&data).map_err(err)?;
        let cfg = nncore::TrainConfig {
            epochs,
            batch_size,
            seed,
            ..Default::default()
        };
        let (net, _) = nncore::train(&nncore::MNIST_DIMS, &m.train, &cfg, &mut Ideal).map_err(err)?;
        let acc = nncore::evaluate(&net, &m.test, &mut Ideal).map_err(err)?.accuracy;
        Ok((Self { inner: net }, acc))
    }

    fn __repr__(&self) -> String {
        format!("Mlp(dims={:?})", self.inner.dims())
    }
}

/// Default config for `kind` as a JSON string.
#[pyfunction]
fn default_config(kind: &str) -> PyResult<String> {
    serde_json::to_string_pretty(&ExperimentConfig::for_kind(parse_kind(kind)?)).map_err(err)
}

/// Runs an experiment; returns `{"results": csv, "summary": csv}` and
/// writes the files plus a manifest when `out` is given.
#[pyfunction]
#[pyo3(signature = (kind, config_json=None, out=None, seed=None, jobs=0))]
fn run_experiment<'py>(
    py: Python<'py>,
    kind: &str,
    config_json: Option<&str>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    jobs: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = match config_json {
        Some(text) => ExperimentConfig::from_json(text).map_err(err)?,
        None => ExperimentConfig::default(),
    };
    cfg.kind = parse_kind(kind)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let result = py.detach(|| experiment::run(&cfg, jobs)).map_err(err)?;
    if let Some(dir) = out {
        experiment::write_outputs(&cfg, &result, &dir).map_err(err)?;
    }
    let text = |t: &experiment::Table| t.to_csv().map(|b| String::from_utf8_lossy(&b).into_owned());
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("results", text(&result.results).map_err(err)?)?;
    dict.set_item("summary", text(&result.summary).map_err(err)?)?;
    Ok(dict.into_any())
}

#[pymodule]
#[pyo3(name = "pwbsim")]
fn pwbsim_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMlp>()?;
    m.add_function(wrap_pyfunction!(finesse, m)?)?;
    m.add_function(wrap_pyfunction!(compute_time, m)?)?;
    m.add_function(wrap_pyfunction!(write_time_from_frequency, m)?)?;
    m.add_function(wrap_pyfunction!(technologies, m)?)?;
    m.add_function(wrap_pyfunction!(max_rings, m)?)?;
    m.add_function(wrap_pyfunction!(map_network, m)?)?;
    m.add_function(wrap_pyfunction!(weight_updates, m)?)?;
    m.add_function(wrap_pyfunction!(training_cost, m)?)?;
    m.add_function(wrap_pyfunction!(array_power, m)?)?;
    m.add_function(wrap_pyfunction!(crossover_n, m)?)?;
    m.add_function(wrap_pyfunction!(decayed_weight, m)?)?;
    m.add_function(wrap_pyfunction!(quantize, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
