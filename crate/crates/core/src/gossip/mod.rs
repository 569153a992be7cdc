//! Gossip opinion dynamics with stubborn agents.
//!
//! One edge is drawn uniformly per step. Two regular endpoints both move to
//! their midpoint; a regular agent paired with a stubborn one moves halfway
//! towards the stubborn opinion. Update matrices are never materialised.

mod trajectory;

use rand::Rng;

use crate::error::{invalid_input, Error, Result};
use crate::sbm::{Edge, SampledGraph};

pub use trajectory::{update_running_average, DenseTrajectory, Recording, Trajectory, TrajectoryRow};

/// Uniform edge-selection distribution, `w_ij = a_ij / alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionDistribution {
    edges: Vec<Edge>,
    probability: f64,
}

impl InteractionDistribution {
    pub fn new(graph: &SampledGraph) -> Result<Self> {
        if graph.alpha() == 0 {
            return Err(Error::NoEdges);
        }
        Ok(Self {
            edges: graph.edges().to_vec(),
            probability: 1.0 / graph.alpha() as f64,
        })
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Probability of selecting any single edge of the support.
    pub fn edge_probability(&self) -> f64 {
        self.probability
    }

    pub fn probability_of(&self, edge: Edge) -> f64 {
        if self.edges.binary_search(&edge).is_ok() {
            self.probability
        } else {
            0.0
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Edge {
        self.edges[rng.random_range(0..self.edges.len())]
    }
}

/// Opinions of the regular agents plus the fixed stubborn opinions.
///
/// The running time average `S(t)` is kept lazily: each agent stores the
/// compensated sum of its past values up to its last change, so a step costs
/// O(1) regardless of the number of agents.
#[derive(Debug, Clone, PartialEq)]
pub struct GossipState {
    x: Vec<f64>,
    z: Vec<f64>,
    t: u64,
    sum: Vec<f64>,
    carry: Vec<f64>,
    since: Vec<u64>,
}

fn check_finite(name: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(invalid_input(format!("{name}[{}] = {} is not finite", i + 1, v[i]))),
        None => Ok(()),
    }
}

impl GossipState {
    pub fn new(x0: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        check_finite("initial opinion", &x0)?;
        check_finite("stubborn opinion", &z)?;
        let n_r = x0.len();
        Ok(Self {
            x: x0,
            z,
            t: 0,
            sum: vec![0.0; n_r],
            carry: vec![0.0; n_r],
            since: vec![0; n_r],
        })
    }

    pub fn opinions(&self) -> &[f64] {
        &self.x
    }

    pub fn stubborn_opinions(&self) -> &[f64] {
        &self.z
    }

    pub fn step_index(&self) -> u64 {
        self.t
    }

    pub fn n_regular(&self) -> usize {
        self.x.len()
    }

    /// `S(t)`, the mean of `X(0), ..., X(t)`.
    pub fn running_average(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.x.len()];
        self.running_average_into(&mut out);
        out
    }

    pub fn running_average_into(&self, out: &mut [f64]) {
        let denom = (self.t + 1) as f64;
        for (i, o) in out.iter_mut().enumerate() {
            let held = self.x[i] * (self.t + 1 - self.since[i]) as f64;
            *o = ((self.sum[i] + self.carry[i]) + held) / denom;
        }
    }

    /// Folds agent `i`'s current value into its running sum before it changes
    /// at step `t + 1`.
    fn settle(&mut self, i: usize) {
        let held = self.x[i] * (self.t + 1 - self.since[i]) as f64;
        // Neumaier summation
        let s = self.sum[i] + held;
        if self.sum[i].abs() >= held.abs() {
            self.carry[i] += (self.sum[i] - s) + held;
        } else {
            self.carry[i] += (held - s) + self.sum[i];
        }
        self.sum[i] = s;
        self.since[i] = self.t + 1;
    }

    fn set(&mut self, i: usize, value: f64) {
        self.settle(i);
        self.x[i] = value;
    }

    /// Applies the interaction on `{i, j}` without checking graph membership.
    fn interact(&mut self, edge: Edge) {
        let n_r = self.x.len();
        let Edge(i, j) = edge;
        match (i < n_r, j < n_r) {
            (true, true) => {
                let mid = (self.x[i] + self.x[j]) / 2.0;
                self.set(i, mid);
                self.set(j, mid);
            }
            (true, false) => {
                let v = (self.x[i] + self.z[j - n_r]) / 2.0;
                self.set(i, v);
            }
            (false, true) => {
                let v = (self.x[j] + self.z[i - n_r]) / 2.0;
                self.set(j, v);
            }
            // two stubborn agents: nobody moves
            (false, false) => {}
        }
        self.t += 1;
    }

    fn check_graph(&self, graph: &SampledGraph) -> Result<()> {
        if graph.n_regular() != self.x.len() {
            return Err(Error::DimensionMismatch { expected: graph.n_regular(), got: self.x.len() });
        }
        if graph.n_stubborn() != self.z.len() {
            return Err(Error::DimensionMismatch { expected: graph.n_stubborn(), got: self.z.len() });
        }
        Ok(())
    }

    /// Applies one interaction along `edge`, which must belong to `graph`.
    pub fn apply_edge(&mut self, edge: Edge, graph: &SampledGraph) -> Result<()> {
        self.check_graph(graph)?;
        let edge = Edge::new(edge.0, edge.1);
        if !graph.has_edge(edge.0, edge.1) {
            return Err(Error::EdgeNotInGraph(edge.0 + 1, edge.1 + 1));
        }
        self.interact(edge);
        Ok(())
    }

    /// Draws an edge independently of the past and applies it.
    pub fn step<R: Rng + ?Sized>(&mut self, dist: &InteractionDistribution, rng: &mut R) -> Edge {
        let edge = dist.sample(rng);
        self.interact(edge);
        edge
    }
}

/// Runs `horizon` steps from `x0` and records `X(t)` and `S(t)` at the
/// requested steps. Only the requested snapshots are kept.
pub fn simulate<R: Rng + ?Sized>(
    graph: &SampledGraph,
    x0: Vec<f64>,
    z: Vec<f64>,
    horizon: u64,
    rng: &mut R,
    record_times: &[u64],
) -> Result<Recording> {
    let mut times = record_times.to_vec();
    times.sort_unstable();
    times.dedup();
    if let Some(&last) = times.last() {
        if last > horizon {
            return Err(invalid_input(format!("record time {last} exceeds horizon {horizon}")));
        }
    }
    let mut state = GossipState::new(x0, z)?;
    state.check_graph(graph)?;
    let mut recording = Recording::new(state.n_regular(), horizon);
    let mut pending = times.into_iter().peekable();
    let mut snapshot = |state: &GossipState, recording: &mut Recording| {
        while pending.peek() == Some(&state.step_index()) {
            pending.next();
            recording.push(state.step_index(), state.opinions().to_vec(), state.running_average());
        }
    };
    snapshot(&state, &mut recording);
    if horizon > 0 {
        let dist = InteractionDistribution::new(graph)?;
        for _ in 0..horizon {
            state.step(&dist, rng);
            snapshot(&state, &mut recording);
        }
    }
    Ok(recording)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sbm::{sample_sbm_s, two_block_opinions, SbmSParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn path(n_r: usize, n_s: usize, edges: &[(usize, usize)]) -> SampledGraph {
        SampledGraph::from_edges(n_r, n_s, edges.iter().map(|&(i, j)| Edge::new(i, j))).unwrap()
    }

    #[test]
    fn uniform_distribution() {
        let tri = path(3, 0, &[(0, 1), (1, 2), (0, 2)]);
        let d = InteractionDistribution::new(&tri).unwrap();
        assert_eq!(d.edge_probability(), 1.0 / 3.0);
        assert_eq!(d.probability_of(Edge(0, 2)), 1.0 / 3.0);

        let single = path(2, 0, &[(0, 1)]);
        assert_eq!(InteractionDistribution::new(&single).unwrap().edge_probability(), 1.0);

        let empty = path(2, 0, &[]);
        assert!(matches!(InteractionDistribution::new(&empty), Err(Error::NoEdges)));
    }

    #[test]
    fn probabilities_sum_to_one_on_sampled_graph() {
        let p = SbmSParams::two_block(40, 4, 0.3, 0.05, 0.2).unwrap();
        let g = sample_sbm_s(&p, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let d = InteractionDistribution::new(&g).unwrap();
        let total: f64 = d.edges().iter().map(|&e| d.probability_of(e)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(d.probability_of(Edge(40, 41)), 0.0);
    }

    #[test]
    fn regular_pair_moves_to_midpoint() {
        let g = path(2, 0, &[(0, 1)]);
        let mut s = GossipState::new(vec![0.0, 1.0], vec![]).unwrap();
        s.apply_edge(Edge(0, 1), &g).unwrap();
        assert_eq!(s.opinions(), &[0.5, 0.5]);
        assert_eq!(s.step_index(), 1);
    }

    #[test]
    fn stubborn_neighbour_pulls_halfway() {
        let g = path(1, 1, &[(0, 1)]);
        let mut s = GossipState::new(vec![0.0], vec![1.0]).unwrap();
        s.apply_edge(Edge(1, 0), &g).unwrap();
        assert_eq!(s.opinions(), &[0.5]);
        assert_eq!(s.stubborn_opinions(), &[1.0]);
    }

    #[test]
    fn untouched_agents_are_bitwise_unchanged() {
        let g = path(4, 1, &[(0, 1), (2, 4), (1, 3)]);
        let x0 = vec![0.1, -0.7, 0.3333, 0.9];
        let mut s = GossipState::new(x0.clone(), vec![-1.0]).unwrap();
        s.apply_edge(Edge(0, 1), &g).unwrap();
        assert_eq!(s.opinions()[2].to_bits(), x0[2].to_bits());
        assert_eq!(s.opinions()[3].to_bits(), x0[3].to_bits());
        s.apply_edge(Edge(2, 4), &g).unwrap();
        assert_eq!(s.opinions()[3].to_bits(), x0[3].to_bits());
    }

    #[test]
    fn foreign_edge_is_rejected() {
        let g = path(3, 0, &[(0, 1)]);
        let mut s = GossipState::new(vec![0.0; 3], vec![]).unwrap();
        assert!(matches!(s.apply_edge(Edge(1, 2), &g), Err(Error::EdgeNotInGraph(2, 3))));
        assert_eq!(s.step_index(), 0);
    }

    #[test]
    fn stubborn_pair_is_a_counted_no_op() {
        let g = path(1, 2, &[(0, 1), (1, 2)]);
        let mut s = GossipState::new(vec![0.25], vec![1.0, -1.0]).unwrap();
        s.apply_edge(Edge(1, 2), &g).unwrap();
        assert_eq!(s.opinions(), &[0.25]);
        assert_eq!(s.step_index(), 1);
        assert_eq!(s.running_average(), vec![0.25]);
    }

    #[test]
    fn nonfinite_inputs_rejected() {
        assert!(GossipState::new(vec![f64::NAN], vec![]).is_err());
        assert!(GossipState::new(vec![0.0], vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn edge_frequencies_match_uniform() {
        let g = path(4, 1, &[(0, 1), (1, 2), (2, 3), (0, 3), (1, 4)]);
        let d = InteractionDistribution::new(&g).unwrap();
        let mut s = GossipState::new(vec![0.0; 4], vec![1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let steps = 100_000;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..steps {
            *counts.entry(s.step(&d, &mut rng)).or_insert(0usize) += 1;
        }
        let p = 0.2;
        let sd = (steps as f64 * p * (1.0 - p)).sqrt();
        for e in g.edges() {
            let c = counts[e] as f64;
            assert!((c - steps as f64 * p).abs() < 4.0 * sd, "{e:?}: {c}");
        }
    }

    #[test]
    fn single_edge_graph_is_deterministic() {
        let g = path(2, 1, &[(0, 2)]);
        let d = InteractionDistribution::new(&g).unwrap();
        let mut sampled = GossipState::new(vec![-1.0, 0.5], vec![1.0]).unwrap();
        let mut manual = sampled.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..7 {
            sampled.step(&d, &mut rng);
            manual.apply_edge(Edge(0, 2), &g).unwrap();
        }
        assert_eq!(sampled, manual);
        assert_eq!(sampled.opinions()[0], 1.0 - 2.0 / 128.0);
    }

    #[test]
    fn horizon_zero_returns_initial_state() {
        let g = path(2, 0, &[]);
        let rec = simulate(&g, vec![0.3, -0.2], vec![], 0, &mut ChaCha8Rng::seed_from_u64(1), &[0]).unwrap();
        assert_eq!(rec.state_at(0).unwrap(), vec![0.3, -0.2]);
        assert_eq!(rec.average_at(0).unwrap(), vec![0.3, -0.2]);
    }

    #[test]
    fn simulate_rejects_late_record_times_and_empty_graphs() {
        let g = path(2, 0, &[]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(simulate(&g, vec![0.0; 2], vec![], 5, &mut rng, &[6]).is_err());
        assert!(matches!(simulate(&g, vec![0.0; 2], vec![], 5, &mut rng, &[1]), Err(Error::NoEdges)));
        let g = path(2, 0, &[(0, 1)]);
        assert!(matches!(
            simulate(&g, vec![0.0; 3], vec![], 5, &mut rng, &[1]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn same_seed_same_recording() {
        let p = SbmSParams::two_block(20, 2, 0.5, 0.1, 0.3).unwrap();
        let g = sample_sbm_s(&p, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let x0: Vec<f64> = (0..20).map(|i| i as f64 / 20.0 - 0.5).collect();
        let z = two_block_opinions(2);
        let run = |seed| {
            simulate(&g, x0.clone(), z.clone(), 5000, &mut ChaCha8Rng::seed_from_u64(seed), &[10, 100, 5000])
                .unwrap()
        };
        assert_eq!(run(4), run(4));
        assert_ne!(run(4), run(5));
    }

    #[test]
    fn two_cliques_contract_towards_community_means() {
        // brute force on 6 agents: after every step the spread within each
        // clique must not grow
        let g = path(6, 0, &[(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)]);
        let d = InteractionDistribution::new(&g).unwrap();
        let x0 = vec![-0.9, -0.1, -0.5, 0.2, 0.8, 0.6];
        let means = [(-0.9 - 0.1 - 0.5) / 3.0, (0.2 + 0.8 + 0.6) / 3.0];
        let mut s = GossipState::new(x0, vec![]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let spread = |x: &[f64], r: std::ops::Range<usize>| {
            let v = &x[r];
            v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
        };
        let mut prev = [spread(s.opinions(), 0..3), spread(s.opinions(), 3..6)];
        for _ in 0..2000 {
            s.step(&d, &mut rng);
            let cur = [spread(s.opinions(), 0..3), spread(s.opinions(), 3..6)];
            assert!(cur[0] <= prev[0] && cur[1] <= prev[1]);
            prev = cur;
        }
        for (k, r) in [0..3, 3..6].into_iter().enumerate() {
            for &v in &s.opinions()[r] {
                assert!((v - means[k]).abs() < 1e-9);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #[test]
            fn states_stay_in_convex_hull_and_average_is_consistent(
                seed in any::<u64>(),
                n_r in 2usize..16,
                n_s in 0usize..4,
                steps in 1usize..400,
            ) {
                let p = SbmSParams::two_block(n_r, n_s, 0.6, 0.3, 0.5).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let g = sample_sbm_s(&p, &mut rng).unwrap();
                prop_assume!(g.alpha() > 0);
                let x0: Vec<f64> = (0..n_r).map(|_| rng.random_range(-1.0..1.0)).collect();
                let z: Vec<f64> = (0..n_s).map(|_| rng.random_range(-1.0..1.0)).collect();
                let lo = x0.iter().chain(&z).cloned().fold(f64::MAX, f64::min);
                let hi = x0.iter().chain(&z).cloned().fold(f64::MIN, f64::max);
                let d = InteractionDistribution::new(&g).unwrap();
                let mut s = GossipState::new(x0.clone(), z).unwrap();
                let mut total = x0.clone();
                for _ in 0..steps {
                    let before: f64 = s.opinions().iter().sum();
                    let e = s.step(&d, &mut rng);
                    if e.1 < n_r {
                        let after: f64 = s.opinions().iter().sum();
                        prop_assert!((before - after).abs() < 1e-12);
                    }
                    for (t, &x) in total.iter_mut().zip(s.opinions()) {
                        prop_assert!(lo <= x && x <= hi);
                        *t += x;
                    }
                }
                let avg = s.running_average();
                for (a, t) in avg.iter().zip(&total) {
                    prop_assert!((a - t / (steps + 1) as f64).abs() < 1e-12);
                }
            }
        }
    }
}
