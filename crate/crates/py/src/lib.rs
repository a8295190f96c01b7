//! Python bindings: forward model, noise diagnostics, stored networks and
//! the pipeline commands.

use std::path::PathBuf;

use pyo3::exceptions::{PyFileNotFoundError, PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use salinity::eval::EvalReport;
use salinity::forward::{self, RadiometerSpec, SeaState};
use salinity::net::{self, NetworkParams};
use salinity::noise;
use salinity::pipeline::commands::{self, Artifacts, Scenario};
use salinity::pipeline::ExperimentConfig;
use salinity::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::MissingArtifact(p) => PyFileNotFoundError::new_err(format!("missing artifact {}", p.display())),
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn radiometer(frequency: f64, wind_coeff: f64) -> PyResult<RadiometerSpec> {
    let spec = RadiometerSpec { frequency, wind_coeff };
    spec.validate().map_err(py_err)?;
    Ok(spec)
}

/// First Stokes brightness temperature (K).
#[pyfunction]
#[pyo3(signature = (sss, sst, wind, incidence, frequency = 1.413e9, wind_coeff = 0.4))]
fn first_stokes_tb(sss: f64, sst: f64, wind: f64, incidence: f64, frequency: f64, wind_coeff: f64) -> PyResult<f64> {
    let state = SeaState::new(sss, sst, wind).map_err(py_err)?;
    forward::first_stokes_tb(&state, incidence, &radiometer(frequency, wind_coeff)?).map_err(py_err)
}

/// dTB/dSSS (K/psu) by central difference.
#[pyfunction]
#[pyo3(signature = (sss, sst, wind, incidence, frequency = 1.413e9, wind_coeff = 0.4))]
fn sss_sensitivity(sss: f64, sst: f64, wind: f64, incidence: f64, frequency: f64, wind_coeff: f64) -> PyResult<f64> {
    let state = SeaState::new(sss, sst, wind).map_err(py_err)?;
    forward::sss_sensitivity(&state, incidence, &radiometer(frequency, wind_coeff)?).map_err(py_err)
}

/// `(real, imag)` of the seawater permittivity, imag <= 0.
#[pyfunction]
#[pyo3(signature = (sst, sss, frequency = 1.413e9))]
fn permittivity(sst: f64, sss: f64, frequency: f64) -> PyResult<(f64, f64)> {
    let e = forward::permittivity_klein_swift(sst, sss, frequency).map_err(py_err)?;
    Ok((e.real_part, e.imag_part))
}

#[pyfunction]
fn diluted_slope(a: f64, var_noise: f64, var_signal: f64) -> PyResult<f64> {
    noise::diluted_slope(a, var_noise, var_signal).map_err(py_err)
}

#[pyfunction]
fn ols_slope(x: Vec<f64>, y: Vec<f64>) -> Option<f64> {
    noise::ols_slope(&x, &y)
}

/// One correlated Gaussian draw.
#[pyfunction]
fn draw_correlated(sigmas: Vec<f64>, corr: Vec<Vec<f64>>, seed: u64) -> PyResult<Vec<f64>> {
    let m = noise::Matrix::from_rows(&corr).map_err(py_err)?;
    let spec = noise::CorrelatedNoiseSpec::new(sigmas, m).map_err(py_err)?;
    Ok(noise::draw_correlated(&spec, seed))
}

/// Experiment configuration; missing TOML keys take their defaults.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (toml = None))]
    fn new(toml: Option<&str>) -> PyResult<Self> {
        let inner = match toml {
            Some(t) => ExperimentConfig::from_toml(t).map_err(py_err)?,
            None => ExperimentConfig::default(),
        };
        Ok(PyConfig { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyConfig {
            inner: ExperimentConfig::load(&path).map_err(py_err)?,
        })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn classes(&self) -> Vec<u8> {
        self.inner.classes.clone()
    }

    #[setter]
    fn set_classes(&mut self, classes: Vec<u8>) -> PyResult<()> {
        let mut c = self.inner.clone();
        c.classes = classes;
        c.validate().map_err(py_err)?;
        self.inner = c;
        Ok(())
    }
}

/// A trained network read from a parameter file.
#[pyclass(name = "Network")]
struct PyNetwork {
    inner: NetworkParams,
}

#[pymethods]
impl PyNetwork {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyNetwork {
            inner: net::read_params(&path).map_err(py_err)?,
        })
    }

    #[getter]
    fn class_id(&self) -> u8 {
        self.inner.class_id
    }

    #[getter]
    fn n_inputs(&self) -> usize {
        self.inner.n_inputs
    }

    #[getter]
    fn n_hidden(&self) -> usize {
        self.inner.n_hidden
    }

    /// SSS (psu) for TBs followed by noisy SST and wind.
    fn retrieve(&self, inputs: Vec<f64>) -> PyResult<f64> {
        net::forward(&self.inner, &inputs).map_err(py_err)
    }
}

fn metrics<'py>(py: Python<'py>, rep: &EvalReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for (k, v) in rep.stats.metrics() {
        d.set_item(k, v)?;
    }
    Ok(d)
}

/// Residual-noise calibration; returns `{class: (min_ratio, max_ratio)}`.
#[pyfunction]
fn calibrate<'py>(py: Python<'py>, config: &PyConfig, out_dir: PathBuf) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.inner.clone();
    let cals = py
        .detach(|| commands::cmd_calibrate(&cfg, &Artifacts::new(out_dir)))
        .map_err(py_err)?;
    let d = PyDict::new(py);
    for c in cals {
        d.set_item(c.class_id, c.ratio_range())?;
    }
    Ok(d)
}

/// Run a scenario (`b1`, `b2`, `b2+b3`, `bm`, `blend`) for one class;
/// returns `{network: {metric: value}}`. Needs `calibrate` first.
#[pyfunction]
fn run_experiment<'py>(
    py: Python<'py>,
    config: &PyConfig,
    out_dir: PathBuf,
    scenario: &str,
    class_id: u8,
) -> PyResult<Bound<'py, PyDict>> {
    let scenario: Scenario = scenario.parse().map_err(py_err)?;
    let cfg = config.inner.clone();
    let reports = py
        .detach(|| commands::cmd_run_experiment(&cfg, &Artifacts::new(out_dir), scenario, class_id))
        .map_err(py_err)?;
    let d = PyDict::new(py);
    for (name, rep) in &reports {
        d.set_item(name, metrics(py, rep)?)?;
    }
    Ok(d)
}

#[pyfunction]
fn report_diff(a: PathBuf, b: PathBuf) -> PyResult<String> {
    commands::cmd_report_diff(&a, &b).map_err(py_err)
}

#[pymodule]
fn salinity_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(first_stokes_tb, m)?)?;
    m.add_function(wrap_pyfunction!(sss_sensitivity, m)?)?;
    m.add_function(wrap_pyfunction!(permittivity, m)?)?;
    m.add_function(wrap_pyfunction!(diluted_slope, m)?)?;
    m.add_function(wrap_pyfunction!(ols_slope, m)?)?;
    m.add_function(wrap_pyfunction!(draw_correlated, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(report_diff, m)?)?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyNetwork>()?;
    Ok(())
}
