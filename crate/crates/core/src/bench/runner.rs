use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, CurveSpec, ExperimentConfig, GraphSource, ResolvedSize};
use super::summary::{summarize, ExperimentSummary, DEFAULT_THRESHOLDS};
use crate::detect::{accuracy, algorithm1, algorithm2, kmeans_1d_two, transient_window_upper};
use crate::error::{invalid_param, Error, Result};
use crate::gossip::{simulate, GossipState, InteractionDistribution};
use crate::sbm::{karate_club, sample_sbm_s, two_block_opinions, CommunityStructure, SampledGraph};

pub const RUNS_HEADER: &str = "n,graph_sample,trajectory,algorithm,detection_step,accuracy";

/// Trajectory index reserved for the graph-sampling stream.
const GRAPH_STREAM: u64 = u64::MAX;

/// One detection. `accuracy` is `None` when the run failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub n: usize,
    pub graph_sample: u64,
    pub trajectory: u64,
    pub algorithm: Algorithm,
    pub detection_step: u64,
    pub accuracy: Option<f64>,
}

impl RunRecord {
    fn key(&self) -> (usize, u64, u64, Algorithm, u64) {
        (self.n, self.graph_sample, self.trajectory, self.algorithm, self.detection_step)
    }
}

/// Mean accuracy of one detector at one step across trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: usize,
    pub t: u64,
    pub algorithm: Algorithm,
    pub mean_accuracy: f64,
    pub p_exact: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub records: Vec<RunRecord>,
    pub curves: Vec<CurvePoint>,
    pub resolved: Vec<ResolvedSize>,
    /// Wall-clock seconds spent on each network size.
    pub seconds_per_n: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub result: ExperimentResult,
    pub summary: ExperimentSummary,
}

/// 32-byte ChaCha seed holding the four indices verbatim, so distinct
/// `(master_seed, n, graph_sample, trajectory)` tuples never share a seed.
pub fn derive_seed(master_seed: u64, n: usize, graph_sample: u64, trajectory: u64) -> [u8; 32] {
    let mut seed = [0u8; 32];
    for (chunk, v) in seed.chunks_exact_mut(8).zip([master_seed, n as u64, graph_sample, trajectory]) {
        chunk.copy_from_slice(&v.to_le_bytes());
    }
    seed
}

fn rng_for(master_seed: u64, n: usize, graph_sample: u64, trajectory: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_seed(master_seed, n, graph_sample, trajectory))
}

struct Setting<'a> {
    config: &'a ExperimentConfig,
    n: usize,
    graph_sample: u64,
    graph: &'a SampledGraph,
    z: &'a [f64],
    truth: &'a CommunityStructure,
}

impl Setting<'_> {
    fn record(&self, trajectory: u64, algorithm: Algorithm, step: u64, accuracy: Option<f64>) -> RunRecord {
        RunRecord {
            n: self.n,
            graph_sample: self.graph_sample,
            trajectory,
            algorithm,
            detection_step: step,
            accuracy,
        }
    }

    fn initial(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.config.init.draw(self.truth, rng)
    }

    /// Detections at the resolved steps of one trajectory.
    fn run_trajectory(&self, resolved: &ResolvedSize, trajectory: u64) -> Vec<RunRecord> {
        let mut rng = rng_for(self.config.master_seed, self.n, self.graph_sample, trajectory);
        let x0 = self.initial(&mut rng);
        let steps: Vec<u64> = resolved.detections.iter().map(|d| d.1).collect();
        let recording = match simulate(self.graph, x0, self.z.to_vec(), resolved.horizon(), &mut rng, &steps) {
            Ok(rec) => rec,
            Err(e) => {
                warn!("n = {}, sample {}, trajectory {trajectory}: {e}", self.n, self.graph_sample);
                return resolved
                    .detections
                    .iter()
                    .map(|&(algorithm, step)| self.record(trajectory, algorithm, step, None))
                    .collect();
            }
        };
        resolved
            .detections
            .iter()
            .map(|&(algorithm, step)| {
                let acc = match algorithm {
                    Algorithm::Alg1 => algorithm1(&recording, self.n, None, Some(step)),
                    Algorithm::Alg2 => algorithm2(&recording, step),
                }
                .and_then(|detection| accuracy(self.truth, &detection.result.labels));
                if let Err(e) = &acc {
                    warn!("n = {}, sample {}, trajectory {trajectory}: {e}", self.n, self.graph_sample);
                }
                self.record(trajectory, algorithm, step, acc.ok())
            })
            .collect()
    }

    /// Accuracy of each detector at every step `1..=horizon`, indexed
    /// `[algorithm][t - 1]`.
    fn run_curve(&self, curve: &CurveSpec, trajectory: u64) -> Result<Vec<Vec<f64>>> {
        let mut rng = rng_for(self.config.master_seed, self.n, self.graph_sample, trajectory);
        let x0 = self.initial(&mut rng);
        let dist = InteractionDistribution::new(self.graph)?;
        let mut state = GossipState::new(x0, self.z.to_vec())?;
        let mut average = vec![0.0; state.n_regular()];
        let mut out = vec![Vec::with_capacity(curve.horizon as usize); curve.algorithms.len()];
        for _ in 0..curve.horizon {
            state.step(&dist, &mut rng);
            for (k, algorithm) in curve.algorithms.iter().enumerate() {
                let values = match algorithm {
                    Algorithm::Alg1 => state.opinions(),
                    Algorithm::Alg2 => {
                        state.running_average_into(&mut average);
                        &average[..]
                    }
                };
                out[k].push(accuracy(self.truth, &kmeans_1d_two(values)?.labels)?);
            }
        }
        Ok(out)
    }
}

fn failed_rows(config: &ExperimentConfig, resolved: &ResolvedSize, graph_sample: u64) -> Vec<RunRecord> {
    (0..config.trajectories_per_graph)
        .flat_map(|trajectory| {
            resolved.detections.iter().map(move |&(algorithm, step)| RunRecord {
                n: resolved.n,
                graph_sample,
                trajectory,
                algorithm,
                detection_step: step,
                accuracy: None,
            })
        })
        .collect()
}

fn aggregate_curves(n: usize, curve: &CurveSpec, runs: &[Vec<Vec<f64>>]) -> Vec<CurvePoint> {
    let mut points = Vec::new();
    for (k, &algorithm) in curve.algorithms.iter().enumerate() {
        for step in 0..curve.horizon as usize {
            let mut sum = 0.0;
            let mut exact = 0usize;
            for run in runs {
                sum += run[k][step];
                exact += usize::from(run[k][step] == 1.0);
            }
            let m = runs.len().max(1) as f64;
            points.push(CurvePoint {
                n,
                t: step as u64 + 1,
                algorithm,
                mean_accuracy: sum / m,
                p_exact: exact as f64 / m,
            });
        }
    }
    points
}

/// Records at every `runs_stride`-th step of each curve trajectory; failed
/// trajectories produce empty accuracies.
fn curve_records(
    setting: &Setting,
    curve: &CurveSpec,
    trajectory: u64,
    accuracies: Option<&Vec<Vec<f64>>>,
) -> Vec<RunRecord> {
    let mut out = Vec::new();
    for (k, &algorithm) in curve.algorithms.iter().enumerate() {
        for t in (curve.runs_stride..=curve.horizon).step_by(curve.runs_stride as usize) {
            let acc = accuracies.map(|a| a[k][t as usize - 1]);
            out.push(setting.record(trajectory, algorithm, t, acc));
        }
    }
    out
}

struct SizeOutcome {
    records: Vec<RunRecord>,
    curve_runs: Vec<Vec<Vec<f64>>>,
}

fn run_on_graph(setting: &Setting, resolved: &ResolvedSize) -> SizeOutcome {
    let config = setting.config;
    match &config.curve {
        None => {
            let records = (0..config.trajectories_per_graph)
                .into_par_iter()
                .flat_map_iter(|k| setting.run_trajectory(resolved, k))
                .collect();
            SizeOutcome { records, curve_runs: Vec::new() }
        }
        Some(curve) => {
            let runs: Vec<(u64, Result<Vec<Vec<f64>>>)> = (0..config.trajectories_per_graph)
                .into_par_iter()
                .map(|k| (k, setting.run_curve(curve, k)))
                .collect();
            let mut records = Vec::new();
            let mut curve_runs = Vec::new();
            for (k, run) in runs {
                match run {
                    Ok(acc) => {
                        records.extend(curve_records(setting, curve, k, Some(&acc)));
                        curve_runs.push(acc);
                    }
                    Err(e) => {
                        warn!("n = {}, sample {}, trajectory {k}: {e}", setting.n, setting.graph_sample);
                        records.extend(curve_records(setting, curve, k, None));
                    }
                }
            }
            SizeOutcome { records, curve_runs }
        }
    }
}

fn run_sbm_size(config: &ExperimentConfig, n: usize) -> Result<(ResolvedSize, SizeOutcome)> {
    let mut resolved = config.resolve(n)?;
    if let Some(curve) = &config.curve {
        resolved.detections = curve.algorithms.iter().map(|&a| (a, curve.horizon)).collect();
    }
    let upper = transient_window_upper(n, resolved.l_s, resolved.l_d);
    for &(algorithm, t) in &resolved.detections {
        if algorithm == Algorithm::Alg1 && t as f64 >= upper {
            warn!("n = {n}: transient step {t} is not below n l_s / (l_d ln n) = {upper:.1}");
        }
    }
    let params = resolved.params()?;
    let z = two_block_opinions(resolved.n_s);
    let truth = CommunityStructure::canonical(resolved.n_r);
    let outcomes: Vec<SizeOutcome> = (0..config.graph_samples)
        .into_par_iter()
        .map(|g| {
            let mut rng = rng_for(config.master_seed, n, g, GRAPH_STREAM);
            match sample_sbm_s(&params, &mut rng) {
                Ok(graph) => {
                    let setting = Setting { config, n, graph_sample: g, graph: &graph, z: &z, truth: &truth };
                    run_on_graph(&setting, &resolved)
                }
                Err(e) => {
                    warn!("n = {n}, sample {g}: {e}");
                    SizeOutcome { records: failed_rows(config, &resolved, g), curve_runs: Vec::new() }
                }
            }
        })
        .collect();
    let mut merged = SizeOutcome { records: Vec::new(), curve_runs: Vec::new() };
    for o in outcomes {
        merged.records.extend(o.records);
        merged.curve_runs.extend(o.curve_runs);
    }
    Ok((resolved, merged))
}

fn run_karate(config: &ExperimentConfig) -> Result<(ResolvedSize, SizeOutcome)> {
    let network = karate_club();
    let truth = network.truth_or_canonical();
    let n = network.graph.n_total();
    let curve = config.curve.as_ref().expect("validated");
    let resolved = ResolvedSize {
        n,
        n_r: network.graph.n_regular(),
        n_s: network.graph.n_stubborn(),
        l_s: 0.0,
        l_d: 0.0,
        l_stubborn: 0.0,
        detections: curve.algorithms.iter().map(|&a| (a, curve.horizon)).collect(),
    };
    let setting = Setting {
        config,
        n,
        graph_sample: 0,
        graph: &network.graph,
        z: &network.stubborn_opinions,
        truth: &truth,
    };
    let outcome = run_on_graph(&setting, &resolved);
    Ok((resolved, outcome))
}

/// Runs every configured detection on a pool of `parallelism` workers. The
/// output does not depend on `parallelism`.
pub fn run_records(config: &ExperimentConfig, parallelism: usize) -> Result<ExperimentResult> {
    config.validate()?;
    if parallelism == 0 {
        return Err(invalid_param("parallelism must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| invalid_param(format!("cannot build worker pool: {e}")))?;
    let sizes: Vec<usize> = match config.graph {
        GraphSource::Sbm => config.n_values.clone(),
        GraphSource::Karate => vec![0],
    };
    let mut result = ExperimentResult {
        records: Vec::new(),
        curves: Vec::new(),
        resolved: Vec::new(),
        seconds_per_n: Vec::new(),
    };
    for n in sizes {
        let start = Instant::now();
        let (resolved, outcome) = pool.install(|| match config.graph {
            GraphSource::Sbm => run_sbm_size(config, n),
            GraphSource::Karate => run_karate(config),
        })?;
        let seconds = start.elapsed().as_secs_f64();
        info!("n = {}: {} records in {seconds:.2} s", resolved.n, outcome.records.len());
        if let Some(curve) = &config.curve {
            result.curves.extend(aggregate_curves(resolved.n, curve, &outcome.curve_runs));
        }
        result.seconds_per_n.push((resolved.n, seconds));
        result.records.extend(outcome.records);
        result.resolved.push(resolved);
    }
    result.records.sort_by_key(RunRecord::key);
    Ok(result)
}

pub fn write_runs_csv<W: Write>(records: &[RunRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if records.is_empty() {
        w.write_record(RUNS_HEADER.split(','))?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_curves_csv<W: Write>(curves: &[CurvePoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for c in curves {
        w.serialize(c)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the experiment and writes `runs.csv`, `summary.json` and, for
/// per-step studies, `curves.csv` into `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, parallelism: usize, out_dir: &Path) -> Result<ExperimentOutput> {
    let start = Instant::now();
    let result = run_records(config, parallelism)?;
    let rows = summarize(&result.records, &DEFAULT_THRESHOLDS)?;
    let summary = ExperimentSummary::new(config, &result, rows, start.elapsed().as_secs_f64());

    fs::create_dir_all(out_dir)?;
    write_runs_csv(&result.records, fs::File::create(out_dir.join("runs.csv"))?)?;
    if config.curve.is_some() {
        write_curves_csv(&result.curves, fs::File::create(out_dir.join("curves.csv"))?)?;
    }
    let json = serde_json::to_string_pretty(&summary)?;
    fs::write(out_dir.join("summary.json"), json + "\n").map_err(Error::from)?;
    Ok(ExperimentOutput { result, summary })
}
