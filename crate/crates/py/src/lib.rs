//! Python bindings: graph sampling, gossip simulation, detection, the
//! expected-dynamics oracle and the experiment harness.

use std::path::PathBuf;

use gossip_sbm::bench::{self, ExperimentConfig};
use gossip_sbm::detect::{self, Detection as CoreDetection};
use gossip_sbm::gossip::{self, Recording, Trajectory as _};
use gossip_sbm::oracle::{self, ExpectedDynamics};
use gossip_sbm::sbm::{self, Edge, Network, SampledGraph, SbmSParams};
use gossip_sbm::{CommunityStructure, Error};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn to_py(e: Error) -> PyErr {
    if e.is_invalid_input() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

// `Vec<u8>` would reach Python as `bytes`
fn label_list(c: &CommunityStructure) -> Vec<u32> {
    c.labels().iter().map(|&l| u32::from(l)).collect()
}

fn labels(v: Vec<u8>) -> PyResult<CommunityStructure> {
    CommunityStructure::new(v).map_err(to_py)
}

/// A graph with stubborn opinions and optional ground-truth labels. Agent
/// ids are 1-based; regular agents come first.
#[pyclass(name = "Graph", module = "gossip_sbm_py", from_py_object)]
#[derive(Clone)]
struct PyGraph {
    inner: Network,
}

#[pymethods]
impl PyGraph {
    /// Samples an SBM-S graph with the two-block stubborn layout.
    #[staticmethod]
    #[pyo3(signature = (n_r, n_s, l_s, l_d, l_stubborn, seed=0))]
    fn sample(n_r: usize, n_s: usize, l_s: f64, l_d: f64, l_stubborn: f64, seed: u64) -> PyResult<Self> {
        let params = SbmSParams::two_block(n_r, n_s, l_s, l_d, l_stubborn).map_err(to_py)?;
        let graph = sbm::sample_sbm_s(&params, &mut ChaCha8Rng::seed_from_u64(seed)).map_err(to_py)?;
        let truth = CommunityStructure::canonical(n_r);
        let inner = Network::new(graph, sbm::two_block_opinions(n_s), Some(truth)).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn karate() -> Self {
        Self { inner: sbm::karate_club() }
    }

    #[staticmethod]
    #[pyo3(signature = (n_r, n_s, edges, stubborn_opinions, labels=None))]
    fn from_edges(
        n_r: usize,
        n_s: usize,
        edges: Vec<(usize, usize)>,
        stubborn_opinions: Vec<f64>,
        labels: Option<Vec<u8>>,
    ) -> PyResult<Self> {
        if edges.iter().any(|&(i, j)| i == 0 || j == 0) {
            return Err(PyValueError::new_err("agent ids are 1-based"));
        }
        let graph = SampledGraph::from_edges(n_r, n_s, edges.into_iter().map(|(i, j)| Edge::new(i - 1, j - 1)))
            .map_err(to_py)?;
        let truth = labels.map(self::labels).transpose()?;
        let inner = Network::new(graph, stubborn_opinions, truth).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        Ok(Self { inner: Network::from_json(s).map_err(to_py)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }

    fn to_edge_list(&self) -> String {
        self.inner.to_edge_list()
    }

    #[getter]
    fn n_regular(&self) -> usize {
        self.inner.graph.n_regular()
    }

    #[getter]
    fn n_stubborn(&self) -> usize {
        self.inner.graph.n_stubborn()
    }

    #[getter]
    fn alpha(&self) -> usize {
        self.inner.graph.alpha()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.graph.edges().iter().map(|e| (e.0 + 1, e.1 + 1)).collect()
    }

    #[getter]
    fn stubborn_opinions(&self) -> Vec<f64> {
        self.inner.stubborn_opinions.clone()
    }

    #[getter]
    fn labels(&self) -> Option<Vec<u32>> {
        self.inner.truth.as_ref().map(label_list)
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(n_regular={}, n_stubborn={}, alpha={})",
            self.n_regular(),
            self.n_stubborn(),
            self.alpha()
        )
    }
}

/// Recorded snapshots of `X(t)` and `S(t)`.
#[pyclass(name = "Trajectory", module = "gossip_sbm_py")]
struct PyTrajectory {
    inner: Recording,
}

#[pymethods]
impl PyTrajectory {
    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        Ok(Self { inner: Recording::read_csv(text.as_bytes()).map_err(to_py)? })
    }

    fn to_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.inner.write_csv(&mut buf).map_err(to_py)?;
        String::from_utf8(buf).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn times(&self) -> Vec<u64> {
        self.inner.times().collect()
    }

    #[getter]
    fn last_step(&self) -> u64 {
        self.inner.last_step()
    }

    fn state_at(&self, t: u64) -> PyResult<Vec<f64>> {
        self.inner.state_at(t).map_err(to_py)
    }

    fn average_at(&self, t: u64) -> PyResult<Vec<f64>> {
        self.inner.average_at(t).map_err(to_py)
    }
}

/// A two-cluster partition and the step whose data produced it.
#[pyclass(name = "Detection", module = "gossip_sbm_py", get_all)]
struct PyDetection {
    labels: Vec<u32>,
    split_value: f64,
    cost: f64,
    t_used: u64,
    warnings: Vec<String>,
}

impl From<CoreDetection> for PyDetection {
    fn from(d: CoreDetection) -> Self {
        Self {
            labels: label_list(&d.result.labels),
            split_value: d.result.split_value,
            cost: d.result.cost,
            t_used: d.t_used,
            warnings: d.warnings,
        }
    }
}

#[pymethods]
impl PyDetection {
    fn __repr__(&self) -> String {
        format!("Detection(t_used={}, split_value={}, cost={})", self.t_used, self.split_value, self.cost)
    }
}

/// Runs `horizon` gossip steps from `x0`. Every step is recorded unless
/// `record_times` is given.
#[pyfunction]
#[pyo3(signature = (graph, x0, horizon, seed=0, record_times=None))]
fn simulate(
    py: Python<'_>,
    graph: &PyGraph,
    x0: Vec<f64>,
    horizon: u64,
    seed: u64,
    record_times: Option<Vec<u64>>,
) -> PyResult<PyTrajectory> {
    let times = record_times.unwrap_or_else(|| (0..=horizon).collect());
    let net = graph.inner.clone();
    let rec = py
        .detach(move || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            gossip::simulate(&net.graph, x0, net.stubborn_opinions.clone(), horizon, &mut rng, &times)
        })
        .map_err(to_py)?;
    Ok(PyTrajectory { inner: rec })
}

/// Optimal two-cluster split of real values: `(labels, split_value, cost)`.
#[pyfunction]
fn kmeans_1d_two(values: Vec<f64>) -> PyResult<(Vec<u32>, f64, f64)> {
    let r = gossip_sbm::kmeans_1d_two(&values).map_err(to_py)?;
    Ok((label_list(&r.labels), r.split_value, r.cost))
}

#[pyfunction]
fn accuracy(truth: Vec<u8>, estimate: Vec<u8>) -> PyResult<f64> {
    gossip_sbm::accuracy(&labels(truth)?, &labels(estimate)?).map_err(to_py)
}

/// Clusters `X(t)`; `t` defaults to `round(n ln n)`.
#[pyfunction]
#[pyo3(signature = (trajectory, n, t=None, l_s=None, l_d=None))]
fn algorithm1(
    trajectory: &PyTrajectory,
    n: usize,
    t: Option<u64>,
    l_s: Option<f64>,
    l_d: Option<f64>,
) -> PyResult<PyDetection> {
    let links = l_s.zip(l_d);
    Ok(detect::algorithm1(&trajectory.inner, n, links, t).map_err(to_py)?.into())
}

/// Clusters the time average `S(T)`.
#[pyfunction]
fn algorithm2(trajectory: &PyTrajectory, final_step: u64) -> PyResult<PyDetection> {
    Ok(detect::algorithm2(&trajectory.inner, final_step).map_err(to_py)?.into())
}

/// Clusters `S(t)` every `stride` steps until the labels stop changing.
/// Returns `(detection, converged)`.
#[pyfunction]
#[pyo3(signature = (trajectory, threshold=0.0, stride=1))]
fn adaptive_t_selection(trajectory: &PyTrajectory, threshold: f64, stride: u64) -> PyResult<(PyDetection, bool)> {
    let a = detect::adaptive_t_selection(&trajectory.inner, threshold, stride).map_err(to_py)?;
    Ok((a.detection.into(), a.converged))
}

type MatrixPair = (Vec<Vec<f64>>, Vec<Vec<f64>>);

fn matrix_rows(d: &ExpectedDynamics) -> MatrixPair {
    let rows = |eq: bool| {
        let m = if eq { &d.eq } else { &d.er };
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
    };
    (rows(true), rows(false))
}

/// `(E{Q}, E{R})` for uniform edge selection on `graph`.
#[pyfunction]
fn expected_update_matrices(graph: &PyGraph) -> PyResult<MatrixPair> {
    let d = oracle::expected_update_matrices(&graph.inner.graph).map_err(to_py)?;
    Ok(matrix_rows(&d))
}

/// Solution of `(I - E{Q}) x = E{R} z` for `graph` and its stubborn opinions.
#[pyfunction]
fn expected_final_opinions(graph: &PyGraph) -> PyResult<Vec<f64>> {
    let d = oracle::expected_update_matrices(&graph.inner.graph).map_err(to_py)?;
    oracle::expected_final_opinions(&d, &graph.inner.stubborn_opinions).map_err(to_py)
}

/// Expected final opinions of the averaged graph of the two-block model.
#[pyfunction]
fn averaged_final_opinions(n_r: usize, n_s: usize, l_s: f64, l_d: f64, l_stubborn: f64) -> PyResult<Vec<f64>> {
    let params = SbmSParams::two_block(n_r, n_s, l_s, l_d, l_stubborn).map_err(to_py)?;
    let d = oracle::expected_update_matrices_averaged(&sbm::averaged_graph(&params)).map_err(to_py)?;
    oracle::expected_final_opinions(&d, &sbm::two_block_opinions(n_s)).map_err(to_py)
}

/// Runs `fig2`, `fig3`, `karate` or a custom JSON config, writes the result
/// files into `out_dir` and returns the summary as a JSON string.
#[pyfunction]
#[pyo3(signature = (name, out_dir, seed=0, parallelism=1, n_values=None, graph_samples=None, trajectories=None, config_json=None))]
#[allow(clippy::too_many_arguments)]
fn run_experiment(
    py: Python<'_>,
    name: &str,
    out_dir: PathBuf,
    seed: u64,
    parallelism: usize,
    n_values: Option<Vec<usize>>,
    graph_samples: Option<u64>,
    trajectories: Option<u64>,
    config_json: Option<String>,
) -> PyResult<String> {
    let mut config: ExperimentConfig = match (name, config_json) {
        ("fig2", _) => bench::config_fig2(false),
        ("fig3", _) => bench::config_fig3(),
        ("karate", _) => bench::config_karate(),
        ("custom", Some(json)) => bench::config_custom(&json).map_err(to_py)?,
        ("custom", None) => return Err(PyValueError::new_err("custom experiments need config_json")),
        (other, _) => return Err(PyValueError::new_err(format!("unknown experiment {other:?}"))),
    };
    config.master_seed = seed;
    if let Some(n) = n_values {
        config.n_values = n;
    }
    if let Some(g) = graph_samples {
        config.graph_samples = g;
    }
    if let Some(k) = trajectories {
        config.trajectories_per_graph = k;
    }
    let out = py.detach(move || bench::run_experiment(&config, parallelism, &out_dir)).map_err(to_py)?;
    serde_json::to_string(&out.summary).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn gossip_sbm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyDetection>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans_1d_two, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(algorithm1, m)?)?;
    m.add_function(wrap_pyfunction!(algorithm2, m)?)?;
    m.add_function(wrap_pyfunction!(adaptive_t_selection, m)?)?;
    m.add_function(wrap_pyfunction!(expected_update_matrices, m)?)?;
    m.add_function(wrap_pyfunction!(expected_final_opinions, m)?)?;
    m.add_function(wrap_pyfunction!(averaged_final_opinions, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
