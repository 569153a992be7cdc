use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Result};
use crate::sbm::{CommunityStructure, SbmSParams};

/// Schedule values at or above 1 are replaced by this.
pub const CLAMPED_PROBABILITY: f64 = 0.99;

/// Default sweep; stops at 2000 to keep runs short.
pub const DESK_N_VALUES: [usize; 6] = [10, 30, 100, 300, 1000, 2000];
/// Sweep used with `--full`.
pub const FULL_N_VALUES: [usize; 7] = [10, 30, 100, 300, 1000, 3000, 10000];
pub const FIG3_N_VALUES: [usize; 5] = [10, 30, 100, 300, 1000];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentName {
    Fig2,
    Fig3,
    Karate,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Alg1,
    Alg2,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Alg1 => "alg1",
            Algorithm::Alg2 => "alg2",
        }
    }
}

/// A link probability as a function of the network size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbabilitySchedule {
    /// `coef * (ln n)^power / n`
    LogPowerOverN { power: f64, coef: f64 },
    Constant { value: f64 },
}

impl ProbabilitySchedule {
    pub fn raw(&self, n: usize) -> f64 {
        let nf = n as f64;
        match *self {
            ProbabilitySchedule::LogPowerOverN { power, coef } => coef * nf.ln().powf(power) / nf,
            ProbabilitySchedule::Constant { value } => value,
        }
    }

    /// The schedule value, clamped to [`CLAMPED_PROBABILITY`] when it reaches 1.
    pub fn eval(&self, name: &str, n: usize) -> Result<f64> {
        let p = self.raw(n);
        if p.is_nan() || p < 0.0 {
            return Err(invalid_param(format!("{name}({n}) = {p} is not a probability")));
        }
        if p >= 1.0 {
            warn!("{name}({n}) = {p:.4} clamped to {CLAMPED_PROBABILITY}");
            return Ok(CLAMPED_PROBABILITY);
        }
        Ok(p)
    }
}

/// A step count as a function of the network size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    /// `round(coef * n * (ln n)^power)`, halves away from zero.
    NLogPower { power: f64, coef: f64 },
    Fixed { step: u64 },
}

impl StepSchedule {
    pub fn eval(&self, n: usize) -> u64 {
        match *self {
            StepSchedule::NLogPower { power, coef } => {
                let nf = n as f64;
                (coef * nf * nf.ln().powf(power)).round() as u64
            }
            StepSchedule::Fixed { step } => step,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionSpec {
    pub algorithm: Algorithm,
    pub step: StepSchedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedules {
    pub l_s: ProbabilitySchedule,
    pub l_d: ProbabilitySchedule,
    /// Link probability between each stubborn half and its regular community.
    pub l_stubborn: ProbabilitySchedule,
    pub detections: Vec<DetectionSpec>,
}

/// Initial regular opinions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitSpec {
    /// Community 1 uniform on (-1, 0), community 2 uniform on (0, 1).
    CommunitySplit,
    Uniform { low: f64, high: f64 },
}

impl InitSpec {
    pub fn validate(&self) -> Result<()> {
        if let InitSpec::Uniform { low, high } = *self {
            if !(low.is_finite() && high.is_finite() && low < high) {
                return Err(invalid_param(format!("initial opinion range ({low}, {high}) is empty")));
            }
        }
        Ok(())
    }

    pub fn draw<R: Rng + ?Sized>(&self, truth: &CommunityStructure, rng: &mut R) -> Vec<f64> {
        match *self {
            InitSpec::CommunitySplit => truth
                .labels()
                .iter()
                .map(|&l| if l == 1 { -rng.random::<f64>() } else { rng.random::<f64>() })
                .collect(),
            InitSpec::Uniform { low, high } => (0..truth.len()).map(|_| rng.random_range(low..high)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphSource {
    /// SBM-S samples built from the schedules.
    Sbm,
    /// The fixed karate club network; `n_values` and the schedules are unused.
    Karate,
}

/// Per-step accuracy tracking: both detectors applied at steps `1..=horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    pub horizon: u64,
    pub algorithms: Vec<Algorithm>,
    /// Only every `runs_stride`-th step is written to the run table; the
    /// curve itself covers every step.
    pub runs_stride: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: ExperimentName,
    pub graph: GraphSource,
    pub n_values: Vec<usize>,
    pub r0: f64,
    pub schedules: Schedules,
    pub graph_samples: u64,
    pub trajectories_per_graph: u64,
    pub master_seed: u64,
    pub init: InitSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<CurveSpec>,
}

/// Everything a run at network size `n` needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedSize {
    pub n: usize,
    pub n_r: usize,
    pub n_s: usize,
    pub l_s: f64,
    pub l_d: f64,
    pub l_stubborn: f64,
    pub detections: Vec<(Algorithm, u64)>,
}

impl ResolvedSize {
    pub fn params(&self) -> Result<SbmSParams> {
        SbmSParams::two_block(self.n_r, self.n_s, self.l_s, self.l_d, self.l_stubborn)
    }

    pub fn horizon(&self) -> u64 {
        self.detections.iter().map(|d| d.1).max().unwrap_or(0)
    }
}

fn log_over_n(power: f64) -> ProbabilitySchedule {
    ProbabilitySchedule::LogPowerOverN { power, coef: 1.0 }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.graph_samples == 0 || self.trajectories_per_graph == 0 {
            return Err(invalid_param("graph_samples and trajectories_per_graph must be at least 1"));
        }
        if !(self.r0 > 0.0 && self.r0 < 1.0) {
            return Err(invalid_param(format!("r0 = {} is outside (0, 1)", self.r0)));
        }
        self.init.validate()?;
        match (&self.graph, &self.curve) {
            (GraphSource::Karate, None) => {
                return Err(invalid_param("the karate graph is only run as a per-step curve"));
            }
            (_, Some(c)) if c.horizon == 0 || c.algorithms.is_empty() || c.runs_stride == 0 => {
                return Err(invalid_param("curve needs a positive horizon and stride and at least one algorithm"));
            }
            _ => {}
        }
        if self.graph == GraphSource::Sbm {
            if self.n_values.is_empty() {
                return Err(invalid_param("n_values is empty"));
            }
            if self.curve.is_none() && self.schedules.detections.is_empty() {
                return Err(invalid_param("no detections configured"));
            }
            for &n in &self.n_values {
                self.resolve(n)?;
            }
        }
        Ok(())
    }

    /// Sizes, probabilities and detection steps at network size `n`.
    pub fn resolve(&self, n: usize) -> Result<ResolvedSize> {
        let n_r = (self.r0 * n as f64).round() as usize;
        if n_r < 2 || n_r > n {
            return Err(invalid_param(format!("n = {n} with r0 = {} gives {n_r} regular agents", self.r0)));
        }
        let s = &self.schedules;
        let resolved = ResolvedSize {
            n,
            n_r,
            n_s: n - n_r,
            l_s: s.l_s.eval("l_s", n)?,
            l_d: s.l_d.eval("l_d", n)?,
            l_stubborn: s.l_stubborn.eval("l_stubborn", n)?,
            detections: s.detections.iter().map(|d| (d.algorithm, d.step.eval(n))).collect(),
        };
        if let Some(&(_, t)) = resolved.detections.iter().find(|d| d.0 == Algorithm::Alg2 && d.1 == 0) {
            return Err(invalid_param(format!("time-average step {t} at n = {n} must be at least 1")));
        }
        Ok(resolved)
    }

    /// Restricts the sweep to `n_values`.
    pub fn with_n_values(mut self, n_values: &[usize]) -> Self {
        self.n_values = n_values.to_vec();
        self
    }

    pub fn with_runs(mut self, graph_samples: u64, trajectories_per_graph: u64) -> Self {
        self.graph_samples = graph_samples;
        self.trajectories_per_graph = trajectories_per_graph;
        self
    }

    pub fn with_seed(mut self, master_seed: u64) -> Self {
        self.master_seed = master_seed;
        self
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Transient clustering sweep: `l_s = (ln n)^2.5 / n`, `l_d = l_stubborn =
/// ln n / n`, split initial opinions, detection at `round(n ln n)`.
pub fn config_fig2(full: bool) -> ExperimentConfig {
    let n_values = if full { FULL_N_VALUES.to_vec() } else { DESK_N_VALUES.to_vec() };
    ExperimentConfig {
        name: ExperimentName::Fig2,
        graph: GraphSource::Sbm,
        n_values,
        r0: 0.9,
        schedules: Schedules {
            l_s: log_over_n(2.5),
            l_d: log_over_n(1.0),
            l_stubborn: log_over_n(1.0),
            detections: vec![DetectionSpec {
                algorithm: Algorithm::Alg1,
                step: StepSchedule::NLogPower { power: 1.0, coef: 1.0 },
            }],
        },
        graph_samples: 20,
        trajectories_per_graph: 20,
        master_seed: 0,
        init: InitSpec::CommunitySplit,
        curve: None,
    }
}

/// Time-average sweep: `l_s = (ln n)^2 / n`, `l_d = ln n / n`,
/// `l_stubborn = (ln n)^2.5 / n`, uniform initial opinions, detection at
/// `round(n (ln n)^2.5)`.
pub fn config_fig3() -> ExperimentConfig {
    ExperimentConfig {
        name: ExperimentName::Fig3,
        graph: GraphSource::Sbm,
        n_values: FIG3_N_VALUES.to_vec(),
        r0: 0.9,
        schedules: Schedules {
            l_s: log_over_n(2.0),
            l_d: log_over_n(1.0),
            l_stubborn: log_over_n(2.5),
            detections: vec![DetectionSpec {
                algorithm: Algorithm::Alg2,
                step: StepSchedule::NLogPower { power: 2.5, coef: 1.0 },
            }],
        },
        graph_samples: 20,
        trajectories_per_graph: 20,
        master_seed: 0,
        init: InitSpec::Uniform { low: -1.0, high: 1.0 },
        curve: None,
    }
}

/// Karate club horizon. Long enough for the time average to settle near the
/// leaders' influence.
pub const KARATE_HORIZON: u64 = 1000;

/// 400 trajectories on the karate club network with both detectors applied
/// at every step.
pub fn config_karate() -> ExperimentConfig {
    ExperimentConfig {
        name: ExperimentName::Karate,
        graph: GraphSource::Karate,
        n_values: vec![34],
        r0: 32.0 / 34.0,
        schedules: Schedules {
            l_s: ProbabilitySchedule::Constant { value: 0.0 },
            l_d: ProbabilitySchedule::Constant { value: 0.0 },
            l_stubborn: ProbabilitySchedule::Constant { value: 0.0 },
            detections: Vec::new(),
        },
        graph_samples: 1,
        trajectories_per_graph: 400,
        master_seed: 0,
        init: InitSpec::Uniform { low: -1.0, high: 1.0 },
        curve: Some(CurveSpec {
            horizon: KARATE_HORIZON,
            algorithms: vec![Algorithm::Alg1, Algorithm::Alg2],
            runs_stride: 10,
        }),
    }
}

/// Reads and validates a custom experiment from JSON.
pub fn config_custom(json: &str) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig::from_json(json)?;
    c.name = ExperimentName::Custom;
    Ok(c)
}
