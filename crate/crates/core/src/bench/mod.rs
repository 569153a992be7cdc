//! Monte-Carlo experiment harness.
//!
//! An [`ExperimentConfig`] describes a sweep over network sizes. For each size
//! the harness samples `graph_samples` graphs, runs `trajectories_per_graph`
//! gossip trajectories on each, applies the configured detectors and records
//! one [`RunRecord`] per detection. The karate study instead tracks accuracy
//! at every step of each trajectory.

mod config;
mod runner;
mod summary;

pub use config::{
    config_custom, config_fig2, config_fig3, config_karate, Algorithm, CurveSpec, DetectionSpec, ExperimentConfig,
    ExperimentName, GraphSource, InitSpec, ProbabilitySchedule, ResolvedSize, Schedules, StepSchedule,
    CLAMPED_PROBABILITY, DESK_N_VALUES, FIG3_N_VALUES, FULL_N_VALUES, KARATE_HORIZON,
};
pub use runner::{
    derive_seed, run_experiment, run_records, write_curves_csv, write_runs_csv, CurvePoint, ExperimentOutput,
    ExperimentResult, RunRecord, RUNS_HEADER,
};
pub use summary::{summarize, ExperimentSummary, LevelProbability, SummaryRow, DEFAULT_THRESHOLDS};
