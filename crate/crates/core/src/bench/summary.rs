use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::{Algorithm, ExperimentConfig, ExperimentName, ResolvedSize};
use super::runner::{ExperimentResult, RunRecord};
use crate::error::{invalid_input, Result};

pub const DEFAULT_THRESHOLDS: [f64; 4] = [0.8, 0.9, 0.95, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelProbability {
    pub level: f64,
    pub probability: f64,
}

/// Statistics of one `(n, algorithm)` group. Failed runs count as not
/// reaching any level and are left out of the mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub algorithm: Algorithm,
    pub runs: usize,
    pub failed: usize,
    pub mean_accuracy: Option<f64>,
    pub p_at_least: Vec<LevelProbability>,
}

impl SummaryRow {
    /// `P(accuracy >= level)` for a level passed to [`summarize`].
    pub fn probability(&self, level: f64) -> Option<f64> {
        self.p_at_least.iter().find(|p| p.level == level).map(|p| p.probability)
    }
}

/// Per-`(n, algorithm)` mean accuracy and `P(accuracy >= level)`, ordered by
/// `n` and then algorithm.
pub fn summarize(records: &[RunRecord], thresholds: &[f64]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(invalid_input("no run records to summarise"));
    }
    let mut groups: BTreeMap<(usize, Algorithm), Vec<Option<f64>>> = BTreeMap::new();
    for r in records {
        groups.entry((r.n, r.algorithm)).or_default().push(r.accuracy);
    }
    Ok(groups
        .into_iter()
        .map(|((n, algorithm), acc)| {
            let ok: Vec<f64> = acc.iter().flatten().copied().collect();
            let runs = acc.len();
            let mean_accuracy = (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64);
            let p_at_least = thresholds
                .iter()
                .map(|&level| LevelProbability {
                    level,
                    probability: ok.iter().filter(|&&a| a >= level).count() as f64 / runs as f64,
                })
                .collect();
            SummaryRow { n, algorithm, runs, failed: runs - ok.len(), mean_accuracy, p_at_least }
        })
        .collect())
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub name: ExperimentName,
    pub master_seed: u64,
    pub graph_samples: u64,
    pub trajectories_per_graph: u64,
    pub resolved: Vec<ResolvedSize>,
    pub rows: Vec<SummaryRow>,
    pub wall_clock_seconds: f64,
    pub seconds_per_n: Vec<(usize, f64)>,
}

impl ExperimentSummary {
    pub fn new(config: &ExperimentConfig, result: &ExperimentResult, rows: Vec<SummaryRow>, seconds: f64) -> Self {
        Self {
            name: config.name,
            master_seed: config.master_seed,
            graph_samples: config.graph_samples,
            trajectories_per_graph: config.trajectories_per_graph,
            resolved: result.resolved.clone(),
            rows,
            wall_clock_seconds: seconds,
            seconds_per_n: result.seconds_per_n.clone(),
        }
    }
}
