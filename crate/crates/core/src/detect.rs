//! Community detection from trajectory data.
//!
//! Both detectors reduce to optimal two-cluster k-means on the real line,
//! applied either to a transient state `X(t)` or to the time average `S(T)`.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, Error, Result};
use crate::gossip::Trajectory;
use crate::sbm::CommunityStructure;

/// A two-cluster partition of the regular agents.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub labels: CommunityStructure,
    /// Midpoint between the largest value of cluster 1 and the smallest of
    /// cluster 2; the common value for constant input.
    pub split_value: f64,
    /// Within-cluster sum of squared deviations.
    pub cost: f64,
}

fn sse(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return 0.0;
    }
    let mean = sum / n as f64;
    values.map(|v| (v - mean) * (v - mean)).sum()
}

/// Globally optimal 2-means on the line.
///
/// Values are ordered by value and then by agent index, and every contiguous
/// split is scored with prefix sums. Among splits whose costs agree to within
/// rounding, the one with the fewest agents in cluster 1 wins. Cluster 1
/// always contains the smallest value. Constant input yields a single
/// cluster labelled 1.
pub fn kmeans_1d_two(values: &[f64]) -> Result<DetectionResult> {
    if values.is_empty() {
        return Err(invalid_input("cannot cluster an empty vector"));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(invalid_input(format!("value of agent {} is {}", i + 1, values[i])));
    }
    let m = values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();

    if sorted[0] == sorted[m - 1] {
        return Ok(DetectionResult {
            labels: CommunityStructure::new(vec![1; m])?,
            split_value: sorted[0],
            cost: 0.0,
        });
    }

    // SSE is shift invariant; shifting by the middle value limits cancellation
    let shift = sorted[m / 2];
    let mut prefix = Vec::with_capacity(m + 1);
    let mut prefix_sq = Vec::with_capacity(m + 1);
    let (mut s, mut sq) = (0.0, 0.0);
    prefix.push(0.0);
    prefix_sq.push(0.0);
    for v in &sorted {
        let d = v - shift;
        s += d;
        sq += d * d;
        prefix.push(s);
        prefix_sq.push(sq);
    }
    let block_cost = |lo: usize, hi: usize| {
        let k = (hi - lo) as f64;
        let s = prefix[hi] - prefix[lo];
        (prefix_sq[hi] - prefix_sq[lo]) - s * s / k
    };
    let tol = 8.0 * f64::EPSILON * prefix_sq[m].max(f64::MIN_POSITIVE);
    let mut best = (1, f64::INFINITY);
    for k in 1..m {
        let c = block_cost(0, k) + block_cost(k, m);
        if c < best.1 - tol {
            best = (k, c);
        }
    }
    let k = best.0;

    let mut labels = vec![2u8; m];
    for &i in &order[..k] {
        labels[i] = 1;
    }
    let cost = sse(sorted[..k].iter().copied()) + sse(sorted[k..].iter().copied());
    Ok(DetectionResult {
        labels: CommunityStructure::new(labels)?,
        split_value: (sorted[k - 1] + sorted[k]) / 2.0,
        cost,
    })
}

/// Fraction of agents whose labels agree, maximised over the two label
/// permutations. Always in `[0.5, 1]`.
pub fn accuracy(truth: &CommunityStructure, estimate: &CommunityStructure) -> Result<f64> {
    if truth.len() != estimate.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: estimate.len() });
    }
    if truth.is_empty() {
        return Err(invalid_input("accuracy of an empty community structure"));
    }
    let same = truth
        .labels()
        .iter()
        .zip(estimate.labels())
        .filter(|(a, b)| a == b)
        .count();
    let m = truth.len();
    Ok(same.max(m - same) as f64 / m as f64)
}

/// A detection together with the step whose data it used.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub result: DetectionResult,
    pub t_used: u64,
    pub warnings: Vec<String>,
}

impl Detection {
    pub fn report(&self, truth: Option<&CommunityStructure>) -> Result<DetectionReport> {
        let accuracy = truth.map(|t| accuracy(t, &self.result.labels)).transpose()?;
        Ok(DetectionReport {
            labels: self.result.labels.labels().to_vec(),
            split_value: self.result.split_value,
            cost: self.result.cost,
            t_used: self.t_used,
            accuracy,
        })
    }
}

/// JSON shape of a detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub labels: Vec<u8>,
    pub split_value: f64,
    pub cost: f64,
    pub t_used: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
}

/// `round(n log n)` with natural log, halves rounded away from zero.
pub fn transient_step(n: usize) -> u64 {
    let n = n as f64;
    (n * n.ln()).round() as u64
}

/// Upper end `n l_s / (l_d log n)` of the admissible transient window.
pub fn transient_window_upper(n: usize, l_s: f64, l_d: f64) -> f64 {
    let n = n as f64;
    n * l_s / (l_d * n.ln())
}

/// Clusters the transient state `X(t)`.
///
/// `t` defaults to `round(n log n)` for network size `n`. When the link
/// probabilities are given, a step outside the window only produces a warning.
pub fn algorithm1<T: Trajectory + ?Sized>(
    trajectory: &T,
    n: usize,
    link_probabilities: Option<(f64, f64)>,
    t_override: Option<u64>,
) -> Result<Detection> {
    let t = t_override.unwrap_or_else(|| transient_step(n));
    if t > trajectory.last_step() {
        return Err(Error::InsufficientData { requested: t, available: format!("0..={}", trajectory.last_step()) });
    }
    let mut warnings = Vec::new();
    if let Some((l_s, l_d)) = link_probabilities {
        let upper = transient_window_upper(n, l_s, l_d);
        if (t as f64) >= upper {
            let msg = format!("step {t} is not below n l_s / (l_d log n) = {upper:.1}");
            warn!("{msg}");
            warnings.push(msg);
        }
    }
    let x = trajectory.state_at(t)?;
    Ok(Detection { result: kmeans_1d_two(&x)?, t_used: t, warnings })
}

/// Clusters the time average `S(T)`.
pub fn algorithm2<T: Trajectory + ?Sized>(trajectory: &T, final_step: u64) -> Result<Detection> {
    if final_step == 0 {
        return Err(invalid_input("clustering step T must be at least 1"));
    }
    if final_step > trajectory.last_step() {
        return Err(Error::InsufficientData {
            requested: final_step,
            available: format!("0..={}", trajectory.last_step()),
        });
    }
    let s = trajectory.average_at(final_step)?;
    Ok(Detection { result: kmeans_1d_two(&s)?, t_used: final_step, warnings: Vec::new() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveDetection {
    pub detection: Detection,
    pub converged: bool,
}

/// Clusters `S(t)` every `stride` steps and stops once the fraction of agents
/// changing community (up to relabelling) since the previous check is at most
/// `threshold`. The first check compares against the clustering of `S(0)`.
pub fn adaptive_t_selection<T: Trajectory + ?Sized>(
    trajectory: &T,
    threshold: f64,
    stride: u64,
) -> Result<AdaptiveDetection> {
    if stride == 0 {
        return Err(invalid_input("stride must be at least 1"));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(invalid_input(format!("threshold {threshold} outside [0, 1]")));
    }
    let mut prev = kmeans_1d_two(&trajectory.average_at(0)?)?;
    let mut prev_t = 0;
    let mut t = stride;
    while t <= trajectory.last_step() {
        let cur = kmeans_1d_two(&trajectory.average_at(t)?)?;
        let changed = 1.0 - accuracy(&prev.labels, &cur.labels)?;
        if changed <= threshold {
            return Ok(AdaptiveDetection {
                detection: Detection { result: cur, t_used: t, warnings: Vec::new() },
                converged: true,
            });
        }
        prev = cur;
        prev_t = t;
        t += stride;
    }
    Ok(AdaptiveDetection {
        detection: Detection { result: prev, t_used: prev_t, warnings: Vec::new() },
        converged: false,
    })
}

/// Whether the two communities start with different opinion sums, the data
/// condition under which transient clustering can succeed.
pub fn initial_sums_differ(x0: &[f64], truth: &CommunityStructure) -> Result<bool> {
    if x0.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: x0.len() });
    }
    let sum = |label| truth.members(label).map(|i| x0[i]).sum::<f64>();
    let differ = sum(1) != sum(2);
    if !differ {
        warn!("community opinion sums coincide at t = 0");
    }
    Ok(differ)
}
