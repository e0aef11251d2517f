//! Python bindings. Structured results cross the boundary as JSON text and
//! are decoded with the standard `json` module.

use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use prevadim_core::energy::{energy_mc, GraphSampler, NuSampler, UniformUnit};
use prevadim_core::experiment::{self, ExperimentSpec};
use prevadim_core::verify;
use prevadim_core::{
    box_count_curve, build_levels, c_epsilon as core_c_epsilon, fit_dimension, horizon as core_horizon, CantorConfig,
    CantorLevels, FunctionHandle, Labeling, Partitioning, SurfaceGrid, WitnessFunction,
};

fn err(e: prevadim_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<T: serde::Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Truncated fat Cantor construction.
#[pyclass(name = "CantorSet", frozen)]
struct PyCantorSet {
    levels: Arc<CantorLevels>,
}

#[pymethods]
impl PyCantorSet {
    /// Branching 27, 729, 729, ... with `L_k = lambda + (1 - lambda) 2^-k`.
    #[new]
    #[pyo3(signature = (depth = 2, lam = 0.5))]
    fn new(depth: usize, lam: f64) -> PyResult<Self> {
        let cfg = CantorConfig::tower(depth, lam).map_err(err)?;
        Ok(Self {
            levels: Arc::new(build_levels(&cfg).map_err(err)?),
        })
    }

    /// From a JSON config (`max_depth`, `branching`, `lambda`, ...).
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let cfg = CantorConfig::from_json(text).map_err(err)?;
        Ok(Self {
            levels: Arc::new(build_levels(&cfg).map_err(err)?),
        })
    }

    #[getter]
    fn depth(&self) -> usize {
        self.levels.depth()
    }

    #[getter]
    fn faithful_depth(&self) -> usize {
        self.levels.faithful_depth()
    }

    /// Interval count at level `k`, exact.
    fn count(&self, k: usize) -> PyResult<u128> {
        if k > self.levels.depth() {
            return Err(PyValueError::new_err(format!("level {k} beyond depth {}", self.levels.depth())));
        }
        Ok(self.levels.count(k))
    }

    fn measure(&self, k: usize) -> PyResult<f64> {
        if k > self.levels.depth() {
            return Err(PyValueError::new_err(format!("level {k} beyond depth {}", self.levels.depth())));
        }
        Ok(self.levels.measure(k))
    }

    fn level_table(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.levels.level_table())
    }

    /// `(a, b)` of interval `i` (1-based) at level `k`.
    fn interval(&self, k: usize, i: u128) -> PyResult<(f64, f64)> {
        self.levels.interval(k, i).map_err(err)
    }

    fn contains(&self, x: f64) -> PyResult<bool> {
        Ok(matches!(
            self.levels.locate(x).map_err(err)?,
            prevadim_core::cantor::Location::Inside(_)
        ))
    }

    #[pyo3(signature = (n, seed = 0, partitions = 1))]
    fn sample_nu(&self, n: usize, seed: u64, partitions: usize) -> Vec<f64> {
        self.levels.sample_nu_batch(n, seed, Partitioning::new(partitions))
    }

    fn coding_constant(&self, eps: f64) -> PyResult<f64> {
        self.levels.coding_constant(eps).map_err(err)
    }

    /// Monte Carlo `I_s` of the natural measure.
    #[pyo3(signature = (s, pairs = 100_000, seed = 0, partitions = 1))]
    fn energy(&self, py: Python<'_>, s: f64, pairs: usize, seed: u64, partitions: usize) -> PyResult<Py<PyAny>> {
        let est = energy_mc(&NuSampler(&self.levels), s, pairs, seed, Partitioning::new(partitions)).map_err(err)?;
        to_py(py, &est)
    }

    /// Witness function with the labelling drawn from `seed`.
    fn witness(&self, seed: u64) -> PyWitness {
        PyWitness {
            w: WitnessFunction::new(self.levels.clone(), Labeling::from_seed(seed)),
        }
    }
}

/// `phi(x) = sum_k 2^-k omega_k(x)` on the set, linear across gaps.
#[pyclass(name = "Witness", frozen)]
struct PyWitness {
    w: WitnessFunction,
}

#[pymethods]
impl PyWitness {
    #[getter]
    fn seed(&self) -> Option<u64> {
        self.w.labeling().seed()
    }

    fn bit(&self, k: usize, i: u128) -> PyResult<u8> {
        self.w.labeling().bit_checked(self.w.levels(), k, i).map_err(err)
    }

    fn __call__(&self, x: f64) -> PyResult<f64> {
        self.w.eval(x).map_err(err)
    }

    fn eval_grid(&self, xs: Vec<f64>) -> Vec<f64> {
        self.w.eval_grid(&xs)
    }

    /// Box-counting fit of the graph of `phi + f` over the given scales.
    #[pyo3(signature = (scales, f = "zero", samples_per_column = 16))]
    fn box_dimension(&self, py: Python<'_>, scales: Vec<f64>, f: &str, samples_per_column: usize) -> PyResult<Py<PyAny>> {
        let g = FunctionHandle::witness(self.w.clone())
            .add(&FunctionHandle::parse(f, 1, None).map_err(err)?)
            .map_err(err)?;
        let counts = scales
            .iter()
            .map(|&d| box_count_curve(&g, d, samples_per_column))
            .collect::<prevadim_core::Result<Vec<u64>>>()
            .map_err(err)?;
        to_py(py, &fit_dimension(&scales, &counts).map_err(err)?)
    }

    /// Monte Carlo `I_s` of the lifted measure on the graph of `phi + f`.
    #[pyo3(signature = (s, f = "zero", pairs = 100_000, seed = 0, partitions = 1))]
    fn graph_energy(&self, py: Python<'_>, s: f64, f: &str, pairs: usize, seed: u64, partitions: usize) -> PyResult<Py<PyAny>> {
        let f = FunctionHandle::parse(f, 1, None).map_err(err)?;
        let sampler = GraphSampler { witness: &self.w, f: &f };
        let est = energy_mc(&sampler, s, pairs, seed, Partitioning::new(partitions)).map_err(err)?;
        to_py(py, &est)
    }
}

#[pyfunction]
fn c_epsilon(eps: f64) -> PyResult<f64> {
    core_c_epsilon(eps).map_err(err)
}

/// Lebesgue `I_s` on `[0, 1]`.
#[pyfunction]
#[pyo3(signature = (s, pairs = 100_000, seed = 0, partitions = 1))]
fn uniform_energy(py: Python<'_>, s: f64, pairs: usize, seed: u64, partitions: usize) -> PyResult<Py<PyAny>> {
    let est = energy_mc(&UniformUnit, s, pairs, seed, Partitioning::new(partitions)).map_err(err)?;
    to_py(py, &est)
}

/// Column maxima of an `n x n` row-major height grid.
#[pyfunction]
fn horizon(n: usize, heights: Vec<f64>) -> PyResult<Vec<f64>> {
    let grid = SurfaceGrid::from_heights(n, heights, "python").map_err(err)?;
    core_horizon(&grid).map_err(err)
}

#[pyfunction]
fn verify_real_integral(py: Python<'_>, p: f64, q: f64, r: f64, eps: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &verify::verify_real_integral(p, q, r, eps).map_err(err)?)
}

/// Runs an experiment spec (the JSON a CLI artifact embeds) and returns
/// `(passed, rendered output)`.
#[pyfunction]
fn run_spec(spec: &str) -> PyResult<(bool, String)> {
    let spec: ExperimentSpec = serde_json::from_str(spec).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let outcome = experiment::run(&spec).map_err(err)?;
    let text = outcome.render(&spec).map_err(err)?;
    Ok((outcome.passed, text))
}

#[pymodule]
fn prevadim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCantorSet>()?;
    m.add_class::<PyWitness>()?;
    m.add_function(wrap_pyfunction!(c_epsilon, m)?)?;
    m.add_function(wrap_pyfunction!(uniform_energy, m)?)?;
    m.add_function(wrap_pyfunction!(horizon, m)?)?;
    m.add_function(wrap_pyfunction!(verify_real_integral, m)?)?;
    m.add_function(wrap_pyfunction!(run_spec, m)?)?;
    Ok(())
}
