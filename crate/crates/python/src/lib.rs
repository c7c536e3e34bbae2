//! Python module `pystmcap`: networks, bases, the BPDN solver, RIP probes,
//! bounds and the experiment runners. Matrices cross the boundary as lists
//! of rows; configs and reports as JSON strings.

use std::path::PathBuf;

use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use stmcap::bases::{self, AmplitudeLaw, BasisKind, SparsityBasis};
use stmcap::bounds::{self, BoundParams};
use stmcap::experiments::{self, ExperimentConfig, ExperimentKind, Scale};
use stmcap::network::{self as net, EigenPhases, NetworkSpec, Topology};
use stmcap::rip::{self, RipEstimate};
use stmcap::solver::{self, RecoveryProblem};
use stmcap::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Numerical(_) | Error::Csv(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("matrix rows have different lengths"));
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.iter().flatten().copied(),
    ))
}

fn parse_basis(kind: &str, n: usize, levels: usize) -> PyResult<SparsityBasis> {
    let kind: BasisKind = kind.parse().map_err(py_err)?;
    SparsityBasis::with_levels(kind, n, levels).map_err(py_err)
}

/// Sparsifying basis (`canonical`, `dct`, `daubechies10`, `symlet3`).
#[pyclass(name = "Basis", frozen)]
struct PyBasis(SparsityBasis);

#[pymethods]
impl PyBasis {
    #[new]
    #[pyo3(signature = (kind, n, levels = bases::DEFAULT_LEVELS))]
    fn new(kind: &str, n: usize, levels: usize) -> PyResult<Self> {
        parse_basis(kind, n, levels).map(Self)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind().name()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// Samples from coefficients.
    fn apply(&self, coefficients: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.apply(&coefficients).map_err(py_err)
    }

    /// Coefficients from samples.
    fn analyze(&self, samples: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.analyze(&samples).map_err(py_err)
    }

    fn coherence(&self) -> PyResult<f64> {
        self.0.default_coherence().map_err(py_err)
    }
}

/// Linear echo-state network.
#[pyclass(name = "Network", frozen)]
struct PyNetwork(net::Network);

#[pymethods]
impl PyNetwork {
    /// `topology` is `random_orthogonal` or `symmetric`; use `from_spec`
    /// for the sized topologies.
    #[new]
    #[pyo3(signature = (nodes, decay = 1.0, seed = 0, topology = "random_orthogonal", equispaced = false))]
    fn new(
        nodes: usize,
        decay: f64,
        seed: u64,
        topology: &str,
        equispaced: bool,
    ) -> PyResult<Self> {
        let topology = match topology {
            "random_orthogonal" => Topology::RandomOrthogonal,
            "symmetric" => Topology::Symmetric,
            other => {
                return Err(PyValueError::new_err(format!(
                    "topology `{other}` needs sizes; use Network.from_spec"
                )))
            }
        };
        let mut spec = NetworkSpec::new(nodes, topology, decay, seed);
        if equispaced {
            spec = spec.with_phases(EigenPhases::Equispaced);
        }
        net::Network::build(&spec).map(Self).map_err(py_err)
    }

    /// Builds from a JSON network spec, as in experiment configs.
    #[staticmethod]
    fn from_spec(spec_json: &str) -> PyResult<Self> {
        let spec: NetworkSpec = serde_json::from_str(spec_json).map_err(json_err)?;
        net::Network::build(&spec).map(Self).map_err(py_err)
    }

    #[getter]
    fn nodes(&self) -> usize {
        self.0.nodes()
    }

    #[getter]
    fn decay(&self) -> f64 {
        self.0.decay()
    }

    fn weights(&self) -> Vec<Vec<f64>> {
        to_rows(self.0.weights())
    }

    fn feedforward(&self) -> Vec<f64> {
        self.0.feedforward().iter().copied().collect()
    }

    fn eigenvalues(&self) -> Vec<(f64, f64)> {
        self.0.eigenvalues().iter().map(|c| (c.re, c.im)).collect()
    }

    fn eigenvector_norm(&self) -> f64 {
        self.0.eigenvector_norm()
    }

    /// `M x length` operator; column `k` is `W^k z`.
    fn operator(&self, length: usize) -> PyResult<Vec<Vec<f64>>> {
        let ens = self.0.assemble_operator(length).map_err(py_err)?;
        Ok(to_rows(&ens.matrix))
    }

    /// State after driving the network with `inputs` (oldest first).
    fn final_state(&self, inputs: Vec<f64>) -> PyResult<Vec<f64>> {
        let x = self.0.final_state(&inputs, None).map_err(py_err)?;
        Ok(x.iter().copied().collect())
    }

    fn spec_json(&self) -> PyResult<String> {
        serde_json::to_string(self.0.spec()).map_err(json_err)
    }
}

/// Random `k`-sparse signal; returns `(samples, support, coefficients)`.
#[pyfunction]
#[pyo3(signature = (basis, k, seed, gaussian = false))]
fn sparse_signal(
    basis: &PyBasis,
    k: usize,
    seed: u64,
    gaussian: bool,
) -> PyResult<(Vec<f64>, Vec<usize>, Vec<f64>)> {
    let law = if gaussian {
        AmplitudeLaw::Gaussian
    } else {
        AmplitudeLaw::default()
    };
    let s = bases::make_sparse_signal(&basis.0, k, law, seed).map_err(py_err)?;
    Ok((s.samples, s.support, s.coefficients))
}

/// Solves `min ||a||_1` s.t. `||A Psi a - x|| <= eps`; returns the report as
/// JSON.
#[pyfunction]
#[pyo3(signature = (operator, observation, eps, basis = None, max_iterations = None))]
fn recover(
    py: Python<'_>,
    operator: Vec<Vec<f64>>,
    observation: Vec<f64>,
    eps: f64,
    basis: Option<&PyBasis>,
    max_iterations: Option<usize>,
) -> PyResult<String> {
    let op = from_rows(&operator)?;
    let basis = basis.map_or_else(|| SparsityBasis::canonical(op.ncols()), |b| b.0);
    let mut problem = RecoveryProblem::new(&op, basis, &observation, eps).map_err(py_err)?;
    if let Some(n) = max_iterations {
        let mut s = *problem.settings();
        s.max_iterations = n;
        problem = problem.with_settings(s);
    }
    let report = py.detach(|| solver::solve_bpdn(&problem)).map_err(py_err)?;
    serde_json::to_string(&report).map_err(json_err)
}

fn estimate_tuple(e: &RipEstimate) -> (f64, f64, f64, f64) {
    (e.delta_hat, e.c_hat, e.min_ratio, e.max_ratio)
}

/// Sampled RIP estimate: `(delta_hat, c_hat, min_ratio, max_ratio)`.
#[pyfunction]
#[pyo3(signature = (operator, sparsity, samples = 1000, seed = 0, basis = None))]
fn probe_rip(
    operator: Vec<Vec<f64>>,
    sparsity: usize,
    samples: usize,
    seed: u64,
    basis: Option<&PyBasis>,
) -> PyResult<(f64, f64, f64, f64)> {
    let op = from_rows(&operator)?;
    let basis = basis.map_or_else(|| SparsityBasis::canonical(op.ncols()), |b| b.0);
    rip::probe_rip(&op, &basis, sparsity, samples, seed)
        .map(|e| estimate_tuple(&e))
        .map_err(py_err)
}

/// Exact RIP constants by enumerating every support.
#[pyfunction]
#[pyo3(signature = (operator, sparsity, basis = None))]
fn exact_rip(
    operator: Vec<Vec<f64>>,
    sparsity: usize,
    basis: Option<&PyBasis>,
) -> PyResult<(f64, f64, f64, f64)> {
    let op = from_rows(&operator)?;
    let basis = basis.map_or_else(|| SparsityBasis::canonical(op.ncols()), |b| b.0);
    rip::exact_rip(&op, &basis, sparsity)
        .map(|e| estimate_tuple(&e))
        .map_err(py_err)
}

/// Bound terms at each length: `(L, k_star, term1, term2, term3, total)`.
#[pyfunction]
#[pyo3(signature = (nodes, q, k, s_max, delta, c, lengths, eps_max = 0.0))]
#[allow(clippy::too_many_arguments)]
fn bound_curve(
    nodes: usize,
    q: f64,
    k: f64,
    s_max: f64,
    delta: f64,
    c: f64,
    lengths: Vec<f64>,
    eps_max: f64,
) -> PyResult<Vec<(f64, f64, f64, f64, f64, f64)>> {
    let mut p = BoundParams::new(nodes, q, k, s_max, delta, c);
    p.eps_max = eps_max;
    let curve = bounds::bound_curve(&p, &lengths).map_err(py_err)?;
    Ok(curve
        .points
        .iter()
        .map(|b| {
            (
                b.l,
                b.k_star,
                b.term_omission,
                b.term_approximation,
                b.term_noise,
                b.total,
            )
        })
        .collect())
}

fn parse_kind(kind: &str) -> PyResult<ExperimentKind> {
    serde_json::from_value(serde_json::Value::String(kind.to_string())).map_err(json_err)
}

/// Preset config (`finite_recovery`, `phase_diagram`, `optimal_length`) as
/// JSON.
#[pyfunction]
#[pyo3(signature = (kind, scale = "desk"))]
fn preset_config(kind: &str, scale: &str) -> PyResult<String> {
    let scale: Scale = scale.parse().map_err(py_err)?;
    serde_json::to_string_pretty(&ExperimentConfig::preset(parse_kind(kind)?, scale))
        .map_err(json_err)
}

/// Runs an experiment config (JSON) and writes its artifacts to `out_dir`.
/// Returns the run summary as JSON.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_json: &str, out_dir: PathBuf) -> PyResult<String> {
    let config: ExperimentConfig = serde_json::from_str(config_json).map_err(json_err)?;
    let out = py
        .detach(|| experiments::run_experiment(&config, &out_dir))
        .map_err(py_err)?;
    serde_json::to_string(&out).map_err(json_err)
}

#[pymodule]
fn pystmcap(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBasis>()?;
    m.add_class::<PyNetwork>()?;
    m.add_function(wrap_pyfunction!(sparse_signal, m)?)?;
    m.add_function(wrap_pyfunction!(recover, m)?)?;
    m.add_function(wrap_pyfunction!(probe_rip, m)?)?;
    m.add_function(wrap_pyfunction!(exact_rip, m)?)?;
    m.add_function(wrap_pyfunction!(bound_curve, m)?)?;
    m.add_function(wrap_pyfunction!(preset_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
