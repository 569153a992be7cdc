//! Two-community stochastic block models, with and without stubborn agents.
//!
//! Regular agents occupy indices `0..n_r` and stubborn agents `n_r..n_r + n_s`.
//! Community 1 is the first `ceil(n_r / 2)` regular agents, community 2 the rest.

mod io;
mod karate;

use log::warn;
use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, invalid_param, Error, Result};

pub use io::Network;
pub use karate::{karate_club, karate_edge_checksum, karate_member_id, KARATE_EDGES, KARATE_EDGE_CHECKSUM};

/// Absolute tolerance for the uniformity checks on `L_s` row sums and `L_s z`.
pub const UNIFORMITY_TOL: f64 = 1e-12;

/// Community label per regular agent, each 1 or 2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct CommunityStructure(Vec<u8>);

impl CommunityStructure {
    pub fn new(labels: Vec<u8>) -> Result<Self> {
        if let Some(pos) = labels.iter().position(|&l| l != 1 && l != 2) {
            return Err(invalid_input(format!(
                "label of agent {} is {}, expected 1 or 2",
                pos + 1,
                labels[pos]
            )));
        }
        Ok(Self(labels))
    }

    /// Ground truth of the SBM-S: `ceil(n_r / 2)` ones followed by twos.
    pub fn canonical(n_r: usize) -> Self {
        let first = community_one_size(n_r);
        Self((0..n_r).map(|i| if i < first { 1 } else { 2 }).collect())
    }

    pub fn labels(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The same partition with labels 1 and 2 exchanged.
    pub fn swapped(&self) -> Self {
        Self(self.0.iter().map(|&l| 3 - l).collect())
    }

    pub fn members(&self, label: u8) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(move |(_, &l)| l == label)
            .map(|(i, _)| i)
    }
}

impl TryFrom<Vec<u8>> for CommunityStructure {
    type Error = Error;

    fn try_from(labels: Vec<u8>) -> Result<Self> {
        Self::new(labels)
    }
}

impl From<CommunityStructure> for Vec<u8> {
    fn from(c: CommunityStructure) -> Self {
        c.0
    }
}

/// Size of community 1 for `n_r` regular agents. Odd counts give community 1
/// the extra agent.
pub fn community_one_size(n_r: usize) -> usize {
    n_r.div_ceil(2)
}

fn same_community(n_r: usize, i: usize, j: usize) -> bool {
    let first = community_one_size(n_r);
    (i < first) == (j < first)
}

/// Checks a probability. Values in the closed unit interval are accepted;
/// the endpoints only produce a warning so deterministic fixtures stay usable.
fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid_param(format!("{name} = {p} is not a probability")));
    }
    if p == 0.0 || p == 1.0 {
        warn!("{name} = {p} lies on the boundary of (0, 1)");
    }
    Ok(())
}

/// Generative parameters of the SBM with stubborn agents.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmSParams {
    n_r: usize,
    n_s: usize,
    l_s: f64,
    l_d: f64,
    /// `n_r x n_s` regular-to-stubborn link probabilities.
    l_stubborn: DMatrix<f64>,
}

impl SbmSParams {
    pub fn new(n_r: usize, n_s: usize, l_s: f64, l_d: f64, l_stubborn: DMatrix<f64>) -> Result<Self> {
        if n_r < 2 {
            return Err(invalid_param(format!("n_r = {n_r}, need at least 2 regular agents")));
        }
        check_probability("l_s", l_s)?;
        check_probability("l_d", l_d)?;
        if l_stubborn.nrows() != n_r || l_stubborn.ncols() != n_s {
            return Err(invalid_param(format!(
                "stubborn link matrix is {}x{}, expected {n_r}x{n_s}",
                l_stubborn.nrows(),
                l_stubborn.ncols()
            )));
        }
        for (k, &p) in l_stubborn.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                let (i, j) = (k % n_r, k / n_r);
                return Err(invalid_param(format!(
                    "stubborn link probability ({}, {}) = {p} is not a probability",
                    i + 1,
                    j + 1
                )));
            }
        }
        if l_stubborn.iter().any(|&p| p == 1.0) {
            warn!("stubborn link matrix has entries equal to 1, outside [0, 1)");
        }
        Ok(Self { n_r, n_s, l_s, l_d, l_stubborn })
    }

    /// No stubborn agents.
    pub fn plain(n_r: usize, l_s: f64, l_d: f64) -> Result<Self> {
        Self::new(n_r, 0, l_s, l_d, DMatrix::zeros(n_r, 0))
    }

    /// Block layout used in the experiments: the first `ceil(n_s / 2)` stubborn
    /// agents link only to community 1 and the rest only to community 2, each
    /// with probability `l_block`.
    pub fn two_block(n_r: usize, n_s: usize, l_s: f64, l_d: f64, l_block: f64) -> Result<Self> {
        let r1 = community_one_size(n_r);
        let s1 = n_s.div_ceil(2);
        let l_stubborn = DMatrix::from_fn(n_r, n_s, |i, j| {
            if (i < r1) == (j < s1) {
                l_block
            } else {
                0.0
            }
        });
        Self::new(n_r, n_s, l_s, l_d, l_stubborn)
    }

    pub fn n_regular(&self) -> usize {
        self.n_r
    }

    pub fn n_stubborn(&self) -> usize {
        self.n_s
    }

    pub fn n_total(&self) -> usize {
        self.n_r + self.n_s
    }

    pub fn l_s(&self) -> f64 {
        self.l_s
    }

    pub fn l_d(&self) -> f64 {
        self.l_d
    }

    pub fn stubborn_links(&self) -> &DMatrix<f64> {
        &self.l_stubborn
    }

    /// Link probability between two regular agents.
    pub fn regular_link(&self, i: usize, j: usize) -> f64 {
        if same_community(self.n_r, i, j) {
            self.l_s
        } else {
            self.l_d
        }
    }
}

/// Stubborn opinions matching [`SbmSParams::two_block`]: +1 for the first
/// `ceil(n_s / 2)` stubborn agents, -1 for the rest.
pub fn two_block_opinions(n_s: usize) -> Vec<f64> {
    let s1 = n_s.div_ceil(2);
    (0..n_s).map(|j| if j < s1 { 1.0 } else { -1.0 }).collect()
}

/// Unordered pair of agents, stored with `0 <= .0 < .1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge(pub usize, pub usize);

impl Edge {
    pub fn new(i: usize, j: usize) -> Self {
        if i <= j {
            Edge(i, j)
        } else {
            Edge(j, i)
        }
    }
}

/// Undirected simple graph over regular and stubborn agents.
///
/// The edge list is kept sorted; a dense adjacency matrix is only built on
/// request since sampled graphs are sparse at large `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledGraph {
    n_r: usize,
    n_s: usize,
    edges: Vec<Edge>,
    neighbors: Vec<Vec<usize>>,
}

impl SampledGraph {
    /// Builds a graph from 0-based edges. Rejects self-loops, duplicates and
    /// out-of-range endpoints.
    pub fn from_edges(n_r: usize, n_s: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let n = n_r + n_s;
        let mut edges: Vec<Edge> = edges.into_iter().map(|e| Edge::new(e.0, e.1)).collect();
        edges.sort_unstable();
        for w in edges.windows(2) {
            if w[0] == w[1] {
                return Err(invalid_input(format!(
                    "duplicate edge {{{}, {}}}",
                    w[0].0 + 1,
                    w[0].1 + 1
                )));
            }
        }
        let mut neighbors = vec![Vec::new(); n];
        for e in &edges {
            if e.1 >= n {
                return Err(invalid_input(format!(
                    "edge {{{}, {}}} exceeds agent count {n}",
                    e.0 + 1,
                    e.1 + 1
                )));
            }
            if e.0 == e.1 {
                return Err(invalid_input(format!("self-loop at agent {}", e.0 + 1)));
            }
            neighbors[e.0].push(e.1);
            neighbors[e.1].push(e.0);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Ok(Self { n_r, n_s, edges, neighbors })
    }

    pub fn n_regular(&self) -> usize {
        self.n_r
    }

    pub fn n_stubborn(&self) -> usize {
        self.n_s
    }

    pub fn n_total(&self) -> usize {
        self.n_r + self.n_s
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Number of edges, `alpha`.
    pub fn alpha(&self) -> usize {
        self.edges.len()
    }

    pub fn is_stubborn(&self, agent: usize) -> bool {
        agent >= self.n_r
    }

    pub fn neighbors(&self, agent: usize) -> &[usize] {
        &self.neighbors[agent]
    }

    pub fn degree(&self, agent: usize) -> usize {
        self.neighbors[agent].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.neighbors.len() && self.neighbors[i].binary_search(&j).is_ok()
    }

    pub fn adjacency_matrix(&self) -> DMatrix<u8> {
        let n = self.n_total();
        let mut a = DMatrix::zeros(n, n);
        for e in &self.edges {
            a[(e.0, e.1)] = 1;
            a[(e.1, e.0)] = 1;
        }
        a
    }
}

fn sample_regular_block<R: Rng + ?Sized>(n_r: usize, l_s: f64, l_d: f64, rng: &mut R, edges: &mut Vec<Edge>) {
    let first = community_one_size(n_r);
    for i in 0..n_r {
        for j in (i + 1)..n_r {
            let p = if (i < first) == (j < first) { l_s } else { l_d };
            if rng.random::<f64>() < p {
                edges.push(Edge(i, j));
            }
        }
    }
}

/// Samples the plain two-community SBM on `n` (even) agents.
pub fn sample_sbm<R: Rng + ?Sized>(n: usize, l_s: f64, l_d: f64, rng: &mut R) -> Result<SampledGraph> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(invalid_param(format!("SBM needs an even agent count >= 2, got {n}")));
    }
    check_probability("l_s", l_s)?;
    check_probability("l_d", l_d)?;
    let mut edges = Vec::new();
    sample_regular_block(n, l_s, l_d, rng, &mut edges);
    SampledGraph::from_edges(n, 0, edges)
}

/// Samples the SBM with stubborn agents. Stubborn agents are never linked to
/// each other.
pub fn sample_sbm_s<R: Rng + ?Sized>(params: &SbmSParams, rng: &mut R) -> Result<SampledGraph> {
    let (n_r, n_s) = (params.n_r, params.n_s);
    let mut edges = Vec::new();
    sample_regular_block(n_r, params.l_s, params.l_d, rng, &mut edges);
    for i in 0..n_r {
        for j in 0..n_s {
            if rng.random::<f64>() < params.l_stubborn[(i, j)] {
                edges.push(Edge(i, n_r + j));
            }
        }
    }
    SampledGraph::from_edges(n_r, n_s, edges)
}

/// Entrywise expectation of the SBM-S adjacency matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedGraph {
    n_r: usize,
    n_s: usize,
    weights: DMatrix<f64>,
    expected_alpha: f64,
}

impl AveragedGraph {
    pub fn n_regular(&self) -> usize {
        self.n_r
    }

    pub fn n_stubborn(&self) -> usize {
        self.n_s
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn expected_alpha(&self) -> f64 {
        self.expected_alpha
    }

    /// Interaction probabilities `E{A} / E{alpha}` of gossip over the averaged graph.
    pub fn interaction_matrix(&self) -> Result<DMatrix<f64>> {
        if self.expected_alpha <= 0.0 {
            return Err(Error::NoEdges);
        }
        Ok(&self.weights / self.expected_alpha)
    }
}

pub fn averaged_graph(params: &SbmSParams) -> AveragedGraph {
    let (n_r, n_s) = (params.n_r, params.n_s);
    let n = n_r + n_s;
    let mut weights = DMatrix::zeros(n, n);
    let mut expected_alpha = 0.0;
    for i in 0..n_r {
        for j in (i + 1)..n_r {
            let w = params.regular_link(i, j);
            weights[(i, j)] = w;
            weights[(j, i)] = w;
            expected_alpha += w;
        }
        for j in 0..n_s {
            let w = params.l_stubborn[(i, j)];
            weights[(i, n_r + j)] = w;
            weights[(n_r + j, i)] = w;
            expected_alpha += w;
        }
    }
    AveragedGraph { n_r, n_s, weights, expected_alpha }
}

/// Per-regular-agent total stubborn link probability.
#[derive(Debug, Clone, PartialEq)]
pub struct StubbornInfluence {
    pub row_sums: Vec<f64>,
    /// The common row sum when all rows agree within [`UNIFORMITY_TOL`].
    pub uniform: Option<f64>,
}

pub fn stubborn_influence_row_sums(params: &SbmSParams) -> StubbornInfluence {
    let row_sums: Vec<f64> = params.l_stubborn.row_iter().map(|r| r.sum()).collect();
    let uniform = row_sums.first().copied().filter(|&first| {
        row_sums.iter().all(|&s| (s - first).abs() <= UNIFORMITY_TOL)
    });
    StubbornInfluence { row_sums, uniform }
}

/// Per-community stubborn field `L_s z` when it is block constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StubbornField {
    pub zeta1: f64,
    pub zeta2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Assumption3Violation {
    LengthMismatch { expected: usize, got: usize },
    /// Agent (0-based) whose field differs from the first agent of its community.
    NotBlockConstant { agent: usize, value: f64, community_value: f64 },
    EqualFields { zeta: f64 },
}

/// Verifies that `L_s z` equals `zeta1` on community 1 and `zeta2 != zeta1` on
/// community 2.
pub fn check_assumption_3(params: &SbmSParams, z: &[f64]) -> Result<StubbornField, Assumption3Violation> {
    if z.len() != params.n_s {
        return Err(Assumption3Violation::LengthMismatch { expected: params.n_s, got: z.len() });
    }
    let field: Vec<f64> = (0..params.n_r)
        .map(|i| (0..params.n_s).map(|j| params.l_stubborn[(i, j)] * z[j]).sum())
        .collect();
    let first = community_one_size(params.n_r);
    let zeta1 = field[0];
    let zeta2 = field[first];
    for (agent, &value) in field.iter().enumerate() {
        let community_value = if agent < first { zeta1 } else { zeta2 };
        if (value - community_value).abs() > UNIFORMITY_TOL {
            return Err(Assumption3Violation::NotBlockConstant { agent, value, community_value });
        }
    }
    if (zeta1 - zeta2).abs() <= UNIFORMITY_TOL {
        return Err(Assumption3Violation::EqualFields { zeta: zeta1 });
    }
    Ok(StubbornField { zeta1, zeta2 })
}
