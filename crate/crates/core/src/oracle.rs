//! Expected dynamics used to check the simulator and the detectors.
//!
//! For a single step, `E{X(t+1) | X(t)} = E{Q} X(t) + E{R} z`. The expected
//! final opinions solve `(I - E{Q}) x = E{R} z`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gossip::Trajectory;
use crate::sbm::{AveragedGraph, CommunityStructure, SampledGraph};

/// Largest regular-agent count solved with a dense LU factorisation.
pub const DENSE_SOLVE_LIMIT: usize = 2000;
/// Residual target of the iterative solver used above [`DENSE_SOLVE_LIMIT`].
pub const ITERATIVE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DynamicsSource {
    Sampled,
    Averaged,
}

/// `E{Q(t)}` (`n_r x n_r`) and `E{R(t)}` (`n_r x n_s`).
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedDynamics {
    pub eq: DMatrix<f64>,
    pub er: DMatrix<f64>,
    pub source: DynamicsSource,
}

impl ExpectedDynamics {
    fn identity(n_r: usize, n_s: usize, source: DynamicsSource) -> Self {
        Self { eq: DMatrix::identity(n_r, n_r), er: DMatrix::zeros(n_r, n_s), source }
    }

    /// Adds the contribution of selecting `{i, j}` with probability `w`.
    fn add_pair(&mut self, i: usize, j: usize, w: f64) {
        let n_r = self.eq.nrows();
        let h = w / 2.0;
        match (i < n_r, j < n_r) {
            (true, true) => {
                self.eq[(i, i)] -= h;
                self.eq[(j, j)] -= h;
                self.eq[(i, j)] += h;
                self.eq[(j, i)] += h;
            }
            (true, false) => {
                self.eq[(i, i)] -= h;
                self.er[(i, j - n_r)] += h;
            }
            (false, true) => {
                self.eq[(j, j)] -= h;
                self.er[(j, i - n_r)] += h;
            }
            (false, false) => {}
        }
    }

    pub fn n_regular(&self) -> usize {
        self.eq.nrows()
    }

    /// Row sums of `[E{Q} E{R}]`.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.eq.nrows())
            .map(|i| self.eq.row(i).sum() + self.er.row(i).sum())
            .collect()
    }
}

/// Expected update matrices of gossip over a fixed sampled graph.
pub fn expected_update_matrices(graph: &SampledGraph) -> Result<ExpectedDynamics> {
    if graph.alpha() == 0 {
        return Err(Error::NoEdges);
    }
    let w = 1.0 / graph.alpha() as f64;
    let mut dynamics = ExpectedDynamics::identity(graph.n_regular(), graph.n_stubborn(), DynamicsSource::Sampled);
    for e in graph.edges() {
        dynamics.add_pair(e.0, e.1, w);
    }
    Ok(dynamics)
}

/// Expected update matrices of gossip over the averaged graph, with
/// interaction probabilities `E{A} / E{alpha}`.
pub fn expected_update_matrices_averaged(avg: &AveragedGraph) -> Result<ExpectedDynamics> {
    let interaction = avg.interaction_matrix()?;
    let n = interaction.nrows();
    let mut dynamics = ExpectedDynamics::identity(avg.n_regular(), avg.n_stubborn(), DynamicsSource::Averaged);
    for i in 0..n {
        for j in (i + 1)..n {
            let w = interaction[(i, j)];
            if w > 0.0 {
                dynamics.add_pair(i, j, w);
            }
        }
    }
    Ok(dynamics)
}

/// Regular agents (0-based) that no stubborn agent can influence.
fn unreachable_agents(dynamics: &ExpectedDynamics) -> Vec<usize> {
    let n_r = dynamics.n_regular();
    let mut seen = vec![false; n_r];
    let mut queue: VecDeque<usize> = (0..n_r)
        .filter(|&i| dynamics.er.row(i).iter().any(|&w| w > 0.0))
        .collect();
    for &i in &queue {
        seen[i] = true;
    }
    while let Some(i) = queue.pop_front() {
        for (j, s) in seen.iter_mut().enumerate() {
            if !*s && j != i && dynamics.eq[(i, j)] > 0.0 {
                *s = true;
                queue.push_back(j);
            }
        }
    }
    (0..n_r).filter(|&i| !seen[i]).collect()
}

/// Conjugate gradients for the symmetric positive definite `I - E{Q}`.
fn conjugate_gradient(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = b.len();
    let target = ITERATIVE_TOL * b.norm().max(1.0);
    let mut x = DVector::zeros(n);
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = r.dot(&r);
    let max_iter = 10 * n + 100;
    for _ in 0..max_iter {
        if rr.sqrt() <= target {
            return Ok(x);
        }
        let ap = a * &p;
        let step = rr / p.dot(&ap);
        x.axpy(step, &p, 1.0);
        r.axpy(-step, &ap, 1.0);
        let rr_next = r.dot(&r);
        p = &r + (rr_next / rr) * &p;
        rr = rr_next;
    }
    if rr.sqrt() <= target {
        Ok(x)
    } else {
        Err(Error::NotConverged { residual: rr.sqrt(), iterations: max_iter })
    }
}

/// Solves `(I - E{Q}) x = E{R} z`.
pub fn expected_final_opinions(dynamics: &ExpectedDynamics, z: &[f64]) -> Result<Vec<f64>> {
    if z.len() != dynamics.er.ncols() {
        return Err(Error::DimensionMismatch { expected: dynamics.er.ncols(), got: z.len() });
    }
    let unreachable = unreachable_agents(dynamics);
    if !unreachable.is_empty() {
        return Err(Error::Singular { unreachable: unreachable.into_iter().map(|i| i + 1).collect() });
    }
    let n_r = dynamics.n_regular();
    let a = DMatrix::identity(n_r, n_r) - &dynamics.eq;
    let b = &dynamics.er * DVector::from_column_slice(z);
    let x = if n_r <= DENSE_SOLVE_LIMIT {
        a.lu().solve(&b).ok_or(Error::Singular { unreachable: vec![] })?
    } else {
        conjugate_gradient(&a, &b)?
    };
    Ok(x.iter().copied().collect())
}

/// Community means of `X(t)` and the largest distance of any agent from its
/// own community mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommunityReference {
    pub mean1: f64,
    pub mean2: f64,
    pub max_deviation: f64,
}

impl CommunityReference {
    /// Whether every agent is closer to its own community mean than half the
    /// gap between the means.
    pub fn is_separated(&self) -> bool {
        self.max_deviation < (self.mean1 - self.mean2).abs() / 2.0
    }
}

pub fn community_reference<T: Trajectory + ?Sized>(
    trajectory: &T,
    truth: &CommunityStructure,
    t: u64,
) -> Result<CommunityReference> {
    let x = trajectory.state_at(t)?;
    if x.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: x.len() });
    }
    let mean = |label| {
        let (n, s) = truth.members(label).fold((0usize, 0.0), |(n, s), i| (n + 1, s + x[i]));
        if n == 0 {
            0.0
        } else {
            s / n as f64
        }
    };
    let means = [mean(1), mean(2)];
    let max_deviation = truth
        .labels()
        .iter()
        .zip(&x)
        .map(|(&l, &v)| (v - means[usize::from(l) - 1]).abs())
        .fold(0.0, f64::max);
    Ok(CommunityReference { mean1: means[0], mean2: means[1], max_deviation })
}

/// JSON shape of oracle output: matrices as row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub source: DynamicsSource,
    pub eq: Vec<Vec<f64>>,
    pub er: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_final_opinions: Option<Vec<f64>>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl OracleReport {
    pub fn new(dynamics: &ExpectedDynamics, expected_final_opinions: Option<Vec<f64>>) -> Self {
        Self {
            source: dynamics.source,
            eq: rows(&dynamics.eq),
            er: rows(&dynamics.er),
            expected_final_opinions,
        }
    }
}
