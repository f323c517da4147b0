//! Python module `knotfit`: problems, samplers, traces and diagnostics.

use std::path::PathBuf;

use knotfit::beam::{solve_beam, BeamSpec};
use knotfit::config::RunConfig;
use knotfit::diagnostics;
use knotfit::experiment;
use knotfit::generate::GeneratorSpec;
use knotfit::{BasisKind, CandidateGrid, CountPrior, Dataset, Error, KnotModel, PriorSpec, RunTrace, SamplerSettings};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Csv(_) | Error::NotPositiveDefinite | Error::Unconstrained(_) | Error::Diagnostics(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Python object -> JSON text via the standard `json` module.
fn dumps(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()
}

fn loads<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

/// Grid, basis, priors and data of one inference problem.
#[pyclass(name = "Problem", module = "knotfit", frozen)]
struct PyProblem {
    inner: knotfit::Problem,
}

#[pymethods]
impl PyProblem {
    /// Regression problem with a uniform knot-count prior.
    #[new]
    #[pyo3(signature = (xs, ds, noise_sd, x_lo, x_hi, n_points=101, basis="linear", n_min=2, n_max=None, a_min=-10.0, a_max=10.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        xs: Vec<f64>,
        ds: Vec<f64>,
        noise_sd: f64,
        x_lo: f64,
        x_hi: f64,
        n_points: usize,
        basis: &str,
        n_min: usize,
        n_max: Option<usize>,
        a_min: f64,
        a_max: f64,
    ) -> PyResult<Self> {
        let basis: BasisKind = serde_json::from_value(serde_json::Value::String(basis.into())).map_err(json_err)?;
        let grid = CandidateGrid::new(x_lo, x_hi, n_points).map_err(to_py)?;
        let prior = PriorSpec::uniform(n_min, n_max.unwrap_or(n_points), a_min, a_max);
        let data = Dataset::new(xs, ds, noise_sd).map_err(to_py)?;
        let inner = knotfit::Problem::regression(grid, basis, prior, data).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Problem described by a run configuration file (any forward model).
    #[staticmethod]
    fn from_config(path: PathBuf) -> PyResult<Self> {
        let cfg = RunConfig::from_path(&path).map_err(to_py)?;
        Ok(Self {
            inner: cfg.build_problem().map_err(to_py)?,
        })
    }

    #[getter]
    fn grid(&self) -> Vec<f64> {
        self.inner.grid().coords().to_vec()
    }

    #[getter]
    fn n_data(&self) -> usize {
        self.inner.data().len()
    }

    fn log_likelihood(&self, indices: Vec<usize>, values: Vec<f64>) -> PyResult<f64> {
        let m = self.model(indices, values)?;
        self.inner.log_likelihood(&m).map_err(to_py)
    }

    fn log_prior(&self, indices: Vec<usize>, values: Vec<f64>) -> PyResult<f64> {
        let m = self.model(indices, values)?;
        Ok(self.inner.log_prior(&m))
    }

    fn curve_on_grid(&self, indices: Vec<usize>, values: Vec<f64>) -> PyResult<Vec<f64>> {
        let m = self.model(indices, values)?;
        self.inner.curve_on_grid(&m).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        let n = match self.inner.prior().count {
            CountPrior::Uniform { n_min, n_max } => format!("n in [{n_min}, {n_max}]"),
            CountPrior::Poisson { lambda } => format!("n ~ Poisson({lambda})"),
        };
        format!(
            "Problem(grid={} points on [{}, {}], basis={:?}, {n}, {} observations)",
            self.inner.grid().len(),
            self.inner.grid().x_lo(),
            self.inner.grid().x_hi(),
            self.inner.basis(),
            self.inner.data().len()
        )
    }
}

impl PyProblem {
    fn model(&self, indices: Vec<usize>, values: Vec<f64>) -> PyResult<KnotModel> {
        KnotModel::new(indices, values, self.inner.grid()).map_err(to_py)
    }
}

/// Thinned samples of a run's target chain.
#[pyclass(name = "Trace", module = "knotfit", frozen)]
struct PyTrace {
    inner: RunTrace,
}

#[pymethods]
impl PyTrace {
    #[staticmethod]
    fn read(dir: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: RunTrace::read_dir(&dir).map_err(to_py)?,
        })
    }

    fn write(&self, dir: PathBuf) -> PyResult<()> {
        self.inner.write_dir(&dir).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn z(&self) -> Vec<f64> {
        self.inner.meta.z.clone()
    }

    #[getter]
    fn steps(&self) -> Vec<u64> {
        self.inner.steps().to_vec()
    }

    #[getter]
    fn ns(&self) -> Vec<usize> {
        self.inner.ns().to_vec()
    }

    #[getter]
    fn log_liks(&self) -> Vec<f64> {
        self.inner.log_liks().to_vec()
    }

    /// One list of grid values per recorded step.
    #[getter]
    fn curves(&self) -> Vec<Vec<f64>> {
        self.inner.curves().map(<[f64]>::to_vec).collect()
    }

    /// Recorded values at grid point `j`.
    fn column(&self, j: usize) -> PyResult<Vec<f64>> {
        if j >= self.inner.n_grid() {
            return Err(PyValueError::new_err(format!("grid index {j} out of range")));
        }
        Ok(self.inner.column(j))
    }

    /// Run metadata (acceptance counters, temperatures, adaptive variance...).
    #[getter]
    fn meta<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        loads(py, &serde_json::to_string(&self.inner.meta).map_err(json_err)?)
    }

    /// Posterior mean, variance, density histogram and knot-count distribution.
    #[pyo3(signature = (discard=0.5, bins=200, value_range=None))]
    fn summary<'py>(
        &self,
        py: Python<'py>,
        discard: f64,
        bins: usize,
        value_range: Option<(f64, f64)>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let range = value_range
            .or(self.inner.meta.value_range)
            .ok_or_else(|| PyValueError::new_err("trace has no stored value range; pass value_range"))?;
        let s = diagnostics::posterior_summary(&self.inner, discard, bins, range).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("z", &s.z)?;
        d.set_item("mean", &s.mean)?;
        d.set_item("variance", &s.variance)?;
        let rows: Vec<Vec<u64>> = (0..s.z.len()).map(|j| s.column(j).to_vec()).collect();
        d.set_item("density", rows)?;
        d.set_item("value_range", s.value_range)?;
        d.set_item("n_distribution", s.n_distribution())?;
        d.set_item("retained", s.retained)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "Trace({} samples, thin {}, {} steps)",
            self.inner.len(),
            self.inner.meta.thin,
            self.inner.meta.total_steps
        )
    }
}

/// Runs one sampler. Extra keyword arguments override sampler settings
/// (`t0`, `n_temperatures`, `thin`, `epsilon`, ...).
#[pyfunction]
#[pyo3(signature = (problem, kind="ap-pt-rjmcmc", steps=100_000, seed=0, **overrides))]
fn run(
    py: Python<'_>,
    problem: &PyProblem,
    kind: &str,
    steps: u64,
    seed: u64,
    overrides: Option<&Bound<'_, PyDict>>,
) -> PyResult<PyTrace> {
    let mut value = serde_json::json!({ "kind": kind, "steps": steps });
    if let Some(o) = overrides {
        let extra: serde_json::Value = serde_json::from_str(&dumps(o.as_any())?).map_err(json_err)?;
        if let (Some(base), serde_json::Value::Object(extra)) = (value.as_object_mut(), extra) {
            base.extend(extra);
        }
    }
    let settings: SamplerSettings = serde_json::from_value(value).map_err(json_err)?;
    let problem = &problem.inner;
    let trace = py
        .detach(|| knotfit::run_sampler(problem, &settings, seed))
        .map_err(to_py)?;
    Ok(PyTrace { inner: trace })
}

/// Pairwise convergence report of two traces.
#[pyfunction]
#[pyo3(signature = (a, b, stride=10_000))]
fn convergence<'py>(py: Python<'py>, a: &PyTrace, b: &PyTrace, stride: u64) -> PyResult<Bound<'py, PyAny>> {
    if stride == 0 {
        return Err(PyValueError::new_err("stride must be positive"));
    }
    let r = diagnostics::convergence_length(&a.inner, &b.inner, stride);
    loads(py, &serde_json::to_string(&r).map_err(json_err)?)
}

/// Every unordered pair of traces: per-pair lengths plus a summary.
#[pyfunction]
#[pyo3(signature = (traces, stride=10_000))]
fn pair_harness<'py>(py: Python<'py>, traces: Vec<PyRef<'py, PyTrace>>, stride: u64) -> PyResult<Bound<'py, PyAny>> {
    let runs: Vec<RunTrace> = traces.iter().map(|t| t.inner.clone()).collect();
    let r = diagnostics::pair_harness(&runs, stride).map_err(to_py)?;
    loads(py, &serde_json::to_string(&r).map_err(json_err)?)
}

#[pyfunction]
fn acf(values: Vec<f64>, max_lag: usize) -> PyResult<Vec<f64>> {
    diagnostics::acf(&values, max_lag).map_err(to_py)
}

/// Synthetic dataset from a generator spec dict, returned as `(xs, ds, noise_sd)`.
#[pyfunction]
fn generate(spec: &Bound<'_, PyDict>) -> PyResult<(Vec<f64>, Vec<f64>, f64)> {
    let spec: GeneratorSpec = serde_json::from_str(&dumps(spec.as_any())?).map_err(json_err)?;
    let d = spec.generate().map_err(to_py)?;
    Ok((d.xs().to_vec(), d.ds().to_vec(), d.noise_sd()))
}

/// Deflection at `xs` of a beam under a piecewise-linear pressure through `pressure`.
#[pyfunction]
#[pyo3(signature = (length, n_elements, flexural_rigidity, pressure, xs, support="cantilever"))]
fn beam_deflection(
    length: f64,
    n_elements: usize,
    flexural_rigidity: f64,
    pressure: Vec<(f64, f64)>,
    xs: Vec<f64>,
    support: &str,
) -> PyResult<Vec<f64>> {
    let spec = match support {
        "cantilever" => BeamSpec::cantilever(length, n_elements, flexural_rigidity),
        "simply_supported" => BeamSpec::simply_supported(length, n_elements, flexural_rigidity),
        other => return Err(PyValueError::new_err(format!("unknown support {other:?}"))),
    };
    if pressure.len() < 2 || pressure.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(PyValueError::new_err("pressure needs at least two points with increasing x"));
    }
    let p = |x: f64| {
        let i = pressure.partition_point(|q| q.0 <= x).clamp(1, pressure.len() - 1);
        let ((x0, y0), (x1, y1)) = (pressure[i - 1], pressure[i]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    };
    let sol = solve_beam(&spec, p).map_err(to_py)?;
    if let Some(&x) = xs.iter().find(|&&x| !(0.0..=length).contains(&x)) {
        return Err(PyValueError::new_err(format!("x = {x} lies outside the beam")));
    }
    Ok(xs.iter().map(|&x| sol.deflection_at(&spec, x)).collect())
}

/// Runs a configuration file like `knotfit run` and returns `run_meta.json` as a dict.
#[pyfunction]
#[pyo3(signature = (config, seed=None, replicas=None, out=None, threads=1))]
fn run_experiment<'py>(
    py: Python<'py>,
    config: PathBuf,
    seed: Option<u64>,
    replicas: Option<usize>,
    out: Option<PathBuf>,
    threads: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = RunConfig::from_path(&config).map_err(to_py)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(k) = replicas {
        cfg.replicas = k;
    }
    if let Some(o) = out {
        cfg.output_dir = o;
    }
    let report = py.detach(|| experiment::run_experiment(&cfg, threads)).map_err(to_py)?;
    loads(py, &serde_json::to_string(&report.meta).map_err(json_err)?)
}

#[pymodule]
#[pyo3(name = "knotfit")]
fn knotfit_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("SAMPLERS", PyList::new(m.py(), ["rjmcmc", "ap-rjmcmc", "pt-rjmcmc", "ap-pt-rjmcmc"])?)?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(convergence, m)?)?;
    m.add_function(wrap_pyfunction!(pair_harness, m)?)?;
    m.add_function(wrap_pyfunction!(acf, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(beam_deflection, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
