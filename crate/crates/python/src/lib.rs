//! Python bindings. Vectors and matrices cross the boundary as lists.

use std::path::PathBuf;

use gridloss::placement::{average_loss_k_with_cap, equal_share_loss};
use gridloss::{io, ControlVector, ControllableSet, LoadProfile, PenaltyModel};
use nalgebra::{DMatrix, DVector};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

create_exception!(gridloss, GridlossError, PyValueError);

fn err(e: gridloss::Error) -> PyErr {
    GridlossError::new_err(e.to_string())
}

fn to_matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(GridlossError::new_err("matrix must be square"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    io::matrix_rows(m)
}

fn profile(n: usize, mu: Option<Vec<f64>>) -> PyResult<LoadProfile> {
    match mu {
        None => Ok(LoadProfile::zeros(n)),
        Some(mu) if mu.len() != n => {
            Err(GridlossError::new_err(format!("profile has {} entries, expected {n}", mu.len())))
        }
        Some(mu) => LoadProfile::new(DVector::from_vec(mu)).map_err(err),
    }
}

/// Explicit coefficients, equal sharing over `nodes`, or uniform sharing.
fn control(n: usize, alpha: Option<Vec<f64>>, nodes: Option<Vec<usize>>) -> PyResult<ControlVector> {
    match (alpha, nodes) {
        (Some(_), Some(_)) => Err(GridlossError::new_err("give either alpha or nodes, not both")),
        (Some(a), None) if a.len() != n => {
            Err(GridlossError::new_err(format!("alpha has {} entries, expected {n}", a.len())))
        }
        (Some(a), None) => ControlVector::from_dense(DVector::from_vec(a)).map_err(err),
        (None, Some(nodes)) => ControlVector::equal_share(n, &nodes).map_err(err),
        (None, None) => Ok(ControlVector::uniform(n)),
    }
}

/// Undirected weighted graph on nodes 0..n.
#[pyclass(name = "Graph", module = "gridloss", frozen)]
pub struct PyGraph {
    inner: gridloss::WeightedGraph,
}

#[pymethods]
impl PyGraph {
    /// `edges` holds (u, v, weight) triples.
    #[new]
    fn new(n: usize, edges: Vec<(usize, usize, f64)>) -> PyResult<Self> {
        let inner = gridloss::WeightedGraph::from_triples(n, &edges).map_err(err)?;
        Ok(Self { inner })
    }

    /// Reads a graph file; node indices are shifted to 0-based.
    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        let (inner, _) = io::read_graph(&path).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn path(n: usize) -> PyResult<Self> {
        Ok(Self { inner: gridloss::generators::path(n).map_err(err)? })
    }

    #[staticmethod]
    fn cycle(n: usize) -> PyResult<Self> {
        Ok(Self { inner: gridloss::generators::cycle(n).map_err(err)? })
    }

    #[staticmethod]
    fn complete(n: usize) -> PyResult<Self> {
        Ok(Self { inner: gridloss::generators::complete(n).map_err(err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.inner.edges().iter().map(|e| (e.u, e.v, e.weight)).collect()
    }

    fn is_connected(&self) -> bool {
        self.inner.is_connected()
    }

    fn laplacian(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.laplacian())
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, edges={})", self.inner.n(), self.inner.edges().len())
    }
}

/// Laplacian of a connected graph with its pseudoinverse.
#[pyclass(name = "Laplacian", module = "gridloss", frozen)]
pub struct PyLaplacian {
    inner: gridloss::LaplacianPair,
}

#[pymethods]
impl PyLaplacian {
    #[new]
    fn new(graph: &PyGraph) -> PyResult<Self> {
        Ok(Self { inner: gridloss::build_laplacian(&graph.inner).map_err(err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn matrix(&self) -> Vec<Vec<f64>> {
        rows(self.inner.laplacian())
    }

    fn pseudoinverse(&self) -> Vec<Vec<f64>> {
        rows(self.inner.pseudoinverse())
    }

    /// Eigenvalues in ascending order.
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.spectrum().eigenvalues.iter().copied().collect()
    }

    fn trace_pseudoinverse(&self) -> f64 {
        self.inner.trace_pseudoinverse()
    }

    fn effective_resistance(&self, i: usize, j: usize) -> PyResult<f64> {
        gridloss::effective_resistance(&self.inner, i, j).map_err(err)
    }

    fn total_effective_resistance(&self) -> f64 {
        gridloss::total_effective_resistance(&self.inner)
    }

    /// Rank-one update for adding `beta` to the weight of edge (i, j).
    fn perturb_edge(&self, i: usize, j: usize, beta: f64) -> PyResult<Self> {
        let pert = gridloss::EdgePerturbation::new(i, j, beta).map_err(err)?;
        Ok(Self { inner: gridloss::perturb_edge(&self.inner, &pert).map_err(err)? })
    }
}

/// Validated covariance of the load fluctuations.
#[pyclass(name = "Covariance", module = "gridloss", frozen)]
pub struct PyCovariance {
    inner: gridloss::CovarianceModel,
}

#[pymethods]
impl PyCovariance {
    #[new]
    fn new(matrix: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = gridloss::validate_covariance(to_matrix(matrix)?).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn iid(n: usize, variance: f64) -> PyResult<Self> {
        Ok(Self { inner: gridloss::iid_covariance(n, variance).map_err(err)? })
    }

    #[staticmethod]
    fn from_file(path: PathBuf, n: usize) -> PyResult<Self> {
        Ok(Self { inner: io::read_covariance(&path, n).map_err(err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn total_variance(&self) -> f64 {
        self.inner.total_variance()
    }

    #[getter]
    fn stochastic_set(&self) -> Vec<usize> {
        self.inner.stochastic_set().to_vec()
    }

    fn matrix(&self) -> Vec<Vec<f64>> {
        rows(self.inner.matrix())
    }
}

#[pyclass(name = "LossReport", module = "gridloss", frozen, get_all)]
pub struct PyLossReport {
    stochastic: f64,
    deterministic: f64,
    total: f64,
}

#[pymethods]
impl PyLossReport {
    fn __repr__(&self) -> String {
        format!(
            "LossReport(stochastic={}, deterministic={}, total={})",
            self.stochastic, self.deterministic, self.total
        )
    }
}

#[pyclass(name = "OptimalControl", module = "gridloss", frozen, get_all)]
pub struct PyOptimalControl {
    alpha: Vec<f64>,
    nodes: Vec<usize>,
    gamma: f64,
    objective: f64,
    kkt_residual: f64,
}

#[pymethods]
impl PyOptimalControl {
    fn __repr__(&self) -> String {
        format!("OptimalControl(alpha={:?}, objective={})", self.alpha, self.objective)
    }
}

#[pyclass(name = "PlacementAverage", module = "gridloss", frozen, get_all)]
pub struct PyPlacementAverage {
    k: usize,
    closed_form: f64,
    c1: f64,
    c2: f64,
    enumerated: Option<f64>,
}

#[pyclass(name = "MCEstimate", module = "gridloss", frozen, get_all)]
pub struct PyMCEstimate {
    mean: f64,
    std_error: f64,
    n_samples: u64,
    seed: u64,
}

#[pymethods]
impl PyMCEstimate {
    fn __repr__(&self) -> String {
        format!("MCEstimate(mean={}, std_error={}, n_samples={})", self.mean, self.std_error, self.n_samples)
    }
}

/// Expected loss of a control: explicit `alpha`, equal share over `nodes`,
/// or uniform sharing when neither is given.
#[pyfunction]
#[pyo3(signature = (lap, cov, alpha=None, nodes=None, mu=None))]
fn expected_loss(
    lap: &PyLaplacian,
    cov: &PyCovariance,
    alpha: Option<Vec<f64>>,
    nodes: Option<Vec<usize>>,
    mu: Option<Vec<f64>>,
) -> PyResult<PyLossReport> {
    let n = lap.inner.n();
    let a = control(n, alpha, nodes)?;
    let r = gridloss::expected_loss(&lap.inner, &cov.inner, &profile(n, mu)?, &a).map_err(err)?;
    Ok(PyLossReport {
        stochastic: r.expected_stochastic_loss,
        deterministic: r.deterministic_loss,
        total: r.expected_total,
    })
}

/// Optimal sharing over `nodes` (all nodes when omitted). Passing both
/// `p_diag` and `xi` adds the usage penalty; `q` defaults to zero.
#[pyfunction]
#[pyo3(signature = (lap, cov, nodes=None, p_diag=None, q=None, xi=None))]
fn optimize(
    lap: &PyLaplacian,
    cov: &PyCovariance,
    nodes: Option<Vec<usize>>,
    p_diag: Option<Vec<f64>>,
    q: Option<Vec<f64>>,
    xi: Option<f64>,
) -> PyResult<PyOptimalControl> {
    let n = lap.inner.n();
    let set = match nodes {
        Some(nodes) => ControllableSet::new(n, nodes).map_err(err)?,
        None => ControllableSet::full(n),
    };
    let opt = match (p_diag, xi) {
        (Some(p), Some(xi)) => {
            let q = q.unwrap_or_else(|| vec![0.0; n]);
            let pen = PenaltyModel::new(DVector::from_vec(p), DVector::from_vec(q), xi).map_err(err)?;
            gridloss::optimize_penalized(&lap.inner, &cov.inner, &pen, &set)
        }
        (None, None) if q.is_none() => {
            if set.is_full() {
                gridloss::optimize_full(&lap.inner, &cov.inner)
            } else {
                gridloss::optimize_subset(&lap.inner, &cov.inner, &set)
            }
        }
        _ => return Err(GridlossError::new_err("the penalty needs both p_diag and xi")),
    }
    .map_err(err)?;
    Ok(PyOptimalControl {
        alpha: opt.alpha_star.alpha().iter().copied().collect(),
        nodes: set.nodes().to_vec(),
        gamma: opt.lagrange_multiplier,
        objective: opt.objective_value,
        kkt_residual: opt.kkt_residual,
    })
}

/// Average equal-share loss over all placements of `k` controllables.
/// `enumerate_cap` bounds the number of subsets enumerated for the check.
#[pyfunction]
#[pyo3(signature = (lap, cov, k, enumerate_cap=0.0))]
fn average_loss_k(lap: &PyLaplacian, cov: &PyCovariance, k: usize, enumerate_cap: f64) -> PyResult<PyPlacementAverage> {
    let a = average_loss_k_with_cap(&lap.inner, &cov.inner, k, enumerate_cap).map_err(err)?;
    Ok(PyPlacementAverage { k: a.k, closed_form: a.closed_form, c1: a.c1, c2: a.c2, enumerated: a.enumerated })
}

/// Returns (ratios as (k, H_k / H_1) pairs, gamma or None).
#[pyfunction]
fn scaling_curve(lap: &PyLaplacian, cov: &PyCovariance, k_max: usize) -> PyResult<(Vec<(usize, f64)>, Option<f64>)> {
    let c = gridloss::scaling_curve(&lap.inner, &cov.inner, k_max).map_err(err)?;
    Ok((c.ratios, c.gamma))
}

#[pyfunction]
fn equal_share_stochastic_loss(lap: &PyLaplacian, cov: &PyCovariance, nodes: Vec<usize>) -> PyResult<f64> {
    equal_share_loss(&lap.inner, &cov.inner, &nodes).map_err(err)
}

/// Monte Carlo estimate of the expected loss; reproducible for a seed.
#[pyfunction]
#[pyo3(signature = (lap, cov, alpha=None, nodes=None, mu=None, samples=100_000, seed=0))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    lap: &PyLaplacian,
    cov: &PyCovariance,
    alpha: Option<Vec<f64>>,
    nodes: Option<Vec<usize>>,
    mu: Option<Vec<f64>>,
    samples: u64,
    seed: u64,
) -> PyResult<PyMCEstimate> {
    let n = lap.inner.n();
    let a = control(n, alpha, nodes)?;
    let mu = profile(n, mu)?;
    let est = py
        .detach(|| gridloss::estimate_expected_loss(&lap.inner, &cov.inner, &mu, &a, seed, samples))
        .map_err(err)?;
    Ok(PyMCEstimate { mean: est.mean, std_error: est.std_error, n_samples: est.n_samples, seed: est.seed })
}

#[pymodule]
#[pyo3(name = "gridloss")]
fn gridloss_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("GridlossError", m.py().get_type::<GridlossError>())?;
    m.add_class::<PyGraph>()?;
    m.add_class::<PyLaplacian>()?;
    m.add_class::<PyCovariance>()?;
    m.add_class::<PyLossReport>()?;
    m.add_class::<PyOptimalControl>()?;
    m.add_class::<PyPlacementAverage>()?;
    m.add_class::<PyMCEstimate>()?;
    m.add_function(wrap_pyfunction!(expected_loss, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(average_loss_k, m)?)?;
    m.add_function(wrap_pyfunction!(scaling_curve, m)?)?;
    m.add_function(wrap_pyfunction!(equal_share_stochastic_loss, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
