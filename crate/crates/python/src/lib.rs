//! Python bindings: experiment specs, the Monte-Carlo harness, tag designs,
//! channel synthesis and the individual detectors.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use swan_core::detectors::{self, DetectorKind, JointMl, LsEstimator};
use swan_core::experiments::{self, ExperimentSpec, Family, ResultRow};
use swan_core::lasso::{LassoDetector, LassoOptions};
use swan_core::phys::{build_channel, ChannelVector, SystemConfig};
use swan_core::sim::{self, StateVector};
use swan_core::tags;
use swan_core::{Complex64, SwanError};

fn to_py(e: SwanError) -> PyErr {
    match e {
        SwanError::Io { .. } | SwanError::Csv { .. } => PyOSError::new_err(e.to_string()),
        SwanError::IterationLimit { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// An experiment: physical constants, sweep axes, detectors and seed.
#[pyclass(name = "Spec", module = "swan")]
struct PySpec {
    inner: ExperimentSpec,
}

#[pymethods]
impl PySpec {
    /// Parses `key = value` config text.
    #[staticmethod]
    fn from_config(text: &str) -> PyResult<Self> {
        ExperimentSpec::from_config_str(text)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        ExperimentSpec::from_file(&path)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    /// One of the canned families: `vs-pilot`, `vs-segments`, `vs-power`
    /// (or `fig2`, `fig3`, `fig4`).
    #[staticmethod]
    #[pyo3(signature = (name, trials = 10_000, seed = 0))]
    fn family(name: &str, trials: usize, seed: u64) -> PyResult<Self> {
        let family = match name {
            "vs-pilot" | "fig2" => Family::VsPilot,
            "vs-segments" | "fig3" => Family::VsSegments,
            "vs-power" | "fig4" => Family::VsPower,
            _ => {
                return Err(PyValueError::new_err(format!(
                    "unknown experiment family `{name}`"
                )))
            }
        };
        Ok(Self {
            inner: family.spec(trials, seed),
        })
    }

    /// Overrides one config key, with the same syntax as the config file.
    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        self.inner.set(key, value).map_err(to_py)?;
        self.inner.validate().map_err(to_py)
    }

    fn to_config(&self) -> String {
        self.inner.to_config_string()
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn trials(&self) -> usize {
        self.inner.trials
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn power_db(&self) -> Vec<f64> {
        self.inner.power_db.clone()
    }

    #[getter]
    fn pilot_lengths(&self) -> Vec<usize> {
        self.inner.pilot_lengths.clone()
    }

    #[getter]
    fn segment_counts(&self) -> Vec<usize> {
        self.inner.segment_counts.clone()
    }

    #[getter]
    fn detectors(&self) -> Vec<&'static str> {
        self.inner.detectors.iter().map(|d| d.as_str()).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Spec(name={:?}, detectors={:?}, M={:?}, T={:?}, P_dB={:?}, trials={}, seed={})",
            self.inner.name,
            self.detectors(),
            self.inner.segment_counts,
            self.inner.pilot_lengths,
            self.inner.power_db,
            self.inner.trials,
            self.inner.seed
        )
    }
}

fn row_dict<'py>(py: Python<'py>, r: &ResultRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("experiment", &r.experiment)?;
    d.set_item("detector", &r.detector)?;
    d.set_item("M", r.m)?;
    d.set_item("T", r.t)?;
    d.set_item("P_dB", r.power_db)?;
    d.set_item("trials", r.trials)?;
    d.set_item("block_err", r.block_err)?;
    d.set_item("seg_err", r.seg_err)?;
    d.set_item("missed_rate", r.missed_rate)?;
    d.set_item("false_alarm_rate", r.false_alarm_rate)?;
    d.set_item("mean_runtime_us", r.mean_runtime_us)?;
    Ok(d)
}

fn rows<'py>(py: Python<'py>, rows: &[ResultRow]) -> PyResult<Vec<Bound<'py, PyDict>>> {
    rows.iter().map(|r| row_dict(py, r)).collect()
}

/// Runs the Monte-Carlo sweep and returns one dict per CSV row.
/// `parallelism = 0` uses every core.
#[pyfunction]
#[pyo3(signature = (spec, parallelism = 1))]
fn run<'py>(
    py: Python<'py>,
    spec: &PySpec,
    parallelism: usize,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let inner = spec.inner.clone();
    let out = py
        .detach(move || experiments::monte_carlo(&inner, parallelism))
        .map_err(to_py)?;
    rows(py, &out.table.rows)
}

/// Like [`run`], also appending the rows to `path` and its metadata sidecar.
#[pyfunction]
#[pyo3(signature = (spec, path, parallelism = 1))]
fn run_to_csv<'py>(
    py: Python<'py>,
    spec: &PySpec,
    path: PathBuf,
    parallelism: usize,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let inner = spec.inner.clone();
    let out = py
        .detach(move || experiments::run_and_write(&inner, parallelism, &path))
        .map_err(to_py)?;
    rows(py, &out.table.rows)
}

#[pyfunction]
fn read_results<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Vec<Bound<'py, PyDict>>> {
    rows(py, &experiments::read_results(&path).map_err(to_py)?.rows)
}

/// A `T × M` matrix of ±1 tags (or a scaled identity for probing).
#[pyclass(name = "TagMatrix", module = "swan", frozen)]
struct PyTagMatrix {
    inner: tags::TagMatrix,
}

#[pymethods]
impl PyTagMatrix {
    /// First `m` columns of the order-`t` Hadamard matrix.
    #[staticmethod]
    fn orthogonal(m: usize, t: usize) -> PyResult<Self> {
        tags::orthogonal_tags(m, t)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    /// Random rows and columns of a Hadamard parent; `parent` defaults to
    /// the smallest power of two covering `max(m, t)`.
    #[staticmethod]
    #[pyo3(signature = (m, t, seed, parent = None))]
    fn submatrix(m: usize, t: usize, seed: u64, parent: Option<usize>) -> PyResult<Self> {
        let parent = parent.unwrap_or_else(|| tags::parent_order(m, t));
        tags::submatrix_tags_from(m, t, parent, seed)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    /// `√t·I_t` probing.
    #[staticmethod]
    fn ideal(t: usize) -> PyResult<Self> {
        tags::ideal_probe(t)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.pilot_len(), self.inner.segments())
    }

    fn entries(&self) -> Vec<Vec<f64>> {
        let e = self.inner.entries();
        (0..e.nrows())
            .map(|i| e.row(i).iter().copied().collect())
            .collect()
    }

    fn is_orthogonal(&self) -> bool {
        self.inner.is_orthogonal()
    }

    fn has_full_column_rank(&self) -> bool {
        self.inner.has_full_column_rank()
    }

    fn __repr__(&self) -> String {
        let (t, m) = self.shape();
        format!("TagMatrix(T={t}, M={m}, kind={:?})", self.inner.kind())
    }
}

/// Effective channel of each segment for the default deployment.
#[pyfunction]
#[pyo3(signature = (segments, user_x = 0.0, user_y = 0.0))]
fn channel(segments: usize, user_x: f64, user_y: f64) -> PyResult<Vec<Complex64>> {
    let config = SystemConfig {
        segments,
        user_x,
        user_y,
        ..SystemConfig::default()
    };
    build_channel(&config).map(|(_, h)| h.0).map_err(to_py)
}

/// Default noise power σ² (linear).
#[pyfunction]
fn noise_power() -> f64 {
    SystemConfig::default().noise_power()
}

/// `y = √P·B·diag(h)·s + n` with seeded complex Gaussian noise.
#[pyfunction]
fn synthesize(
    tags: &PyTagMatrix,
    h: Vec<Complex64>,
    states: Vec<bool>,
    power: f64,
    sigma2: f64,
    seed: u64,
) -> PyResult<Vec<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sim::synthesize(
        &tags.inner,
        &ChannelVector(h),
        &StateVector(states),
        power,
        sigma2,
        &mut rng,
    )
    .map(|o| o.y)
    .map_err(to_py)
}

/// Decides the working state of every segment from one pilot burst.
///
/// `detector` is one of `joint-ml`, `per-segment-ml`, `lasso` or
/// `map-oracle`; the last needs identity probing tags.
#[pyfunction]
#[pyo3(signature = (detector, tags, h, y, power, sigma2, q_fail = 0.02))]
#[allow(clippy::too_many_arguments)]
fn detect(
    py: Python<'_>,
    detector: &str,
    tags: &PyTagMatrix,
    h: Vec<Complex64>,
    y: Vec<Complex64>,
    power: f64,
    sigma2: f64,
    q_fail: f64,
) -> PyResult<Vec<bool>> {
    let kind: DetectorKind = detector.parse().map_err(to_py)?;
    let b = &tags.inner;
    let h = ChannelVector(h);
    let result = py.detach(|| match kind {
        DetectorKind::JointMl => JointMl::new(b, &h, power, detectors::DEFAULT_MAX_JOINT_SEGMENTS)
            .and_then(|d| d.detect(&y)),
        DetectorKind::PerSegmentMl => LsEstimator::new(b, power, sigma2)
            .and_then(|ls| ls.estimate(&y))
            .map(|est| detectors::per_segment_ml(&est, &h)),
        DetectorKind::Lasso => LassoDetector::new(b, &h, power, LassoOptions::default())
            .and_then(|d| d.detect(&y, &StateVector::all_working(h.len()), sigma2)),
        DetectorKind::MapOracle => detectors::map_oracle(b, &y, &h, power, sigma2, q_fail),
        other => Err(SwanError::InvalidConfig(format!(
            "`{other}` is a harness baseline; use per-segment-ml with the probing tags"
        ))),
    });
    result.map(|r| r.states.0).map_err(to_py)
}

/// Per-segment error probability of orthogonal-tag ML detection.
#[pyfunction]
fn analytic_error(h_abs: f64, power: f64, pilot_len: usize, sigma2: f64) -> f64 {
    experiments::analytic_error(h_abs, power, pilot_len, sigma2)
}

#[pyfunction]
fn q_function(x: f64) -> f64 {
    experiments::q_function(x)
}

/// Built-in consistency checks as `(name, passed, detail)` tuples.
#[pyfunction]
fn validate(py: Python<'_>) -> Vec<(String, bool, String)> {
    py.detach(experiments::validate::run_validation)
        .into_iter()
        .map(|c| (c.name.to_string(), c.passed, c.detail))
        .collect()
}

#[pymodule]
fn swan(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("CSV_HEADER", experiments::CSV_HEADER)?;
    m.add(
        "DETECTORS",
        DetectorKind::ALL
            .iter()
            .map(|d| d.as_str())
            .collect::<Vec<_>>(),
    )?;
    m.add_class::<PySpec>()?;
    m.add_class::<PyTagMatrix>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_to_csv, m)?)?;
    m.add_function(wrap_pyfunction!(read_results, m)?)?;
    m.add_function(wrap_pyfunction!(channel, m)?)?;
    m.add_function(wrap_pyfunction!(noise_power, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(detect, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_error, m)?)?;
    m.add_function(wrap_pyfunction!(q_function, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    Ok(())
}
