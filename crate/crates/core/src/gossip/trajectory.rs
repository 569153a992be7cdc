//! Access to recorded trajectories and the trajectory CSV format.
//!
//! CSV columns: `t,agent_index,value,kind` with `kind` either `state` (`X(t)`)
//! or `average` (`S(t)`). Agent indices are 1-based.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, Error, Result};

/// Read access to `X(t)` and `S(t)`, where `S(t)` is the mean of
/// `X(0), ..., X(t)`.
pub trait Trajectory {
    fn n_regular(&self) -> usize;

    /// Last step covered by the trajectory.
    fn last_step(&self) -> u64;

    fn state_at(&self, t: u64) -> Result<Vec<f64>>;

    fn average_at(&self, t: u64) -> Result<Vec<f64>>;
}

/// One step of the time-average recursion:
/// `S(t) = t / (t + 1) * S(t - 1) + 1 / (t + 1) * X(t)`.
pub fn update_running_average(s_prev: &[f64], x_new: &[f64], t: u64) -> Result<Vec<f64>> {
    if t == 0 {
        return Err(invalid_input("running average recursion starts at t = 1"));
    }
    if s_prev.len() != x_new.len() {
        return Err(Error::DimensionMismatch { expected: s_prev.len(), got: x_new.len() });
    }
    let t = t as f64;
    let keep = t / (t + 1.0);
    let add = 1.0 / (t + 1.0);
    Ok(s_prev.iter().zip(x_new).map(|(s, x)| keep * s + add * x).collect())
}

/// Every state `X(0), ..., X(T)` held in memory, with `S(t)` precomputed by
/// the recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTrajectory {
    states: Vec<Vec<f64>>,
    averages: Vec<Vec<f64>>,
}

impl DenseTrajectory {
    pub fn new(states: Vec<Vec<f64>>) -> Result<Self> {
        let first = states.first().ok_or_else(|| invalid_input("trajectory has no states"))?;
        let mut averages = Vec::with_capacity(states.len());
        averages.push(first.clone());
        for (t, x) in states.iter().enumerate().skip(1) {
            let next = update_running_average(&averages[t - 1], x, t as u64)?;
            averages.push(next);
        }
        Ok(Self { states, averages })
    }

    fn check(&self, t: u64) -> Result<usize> {
        if t > self.last_step() {
            return Err(Error::InsufficientData { requested: t, available: format!("0..={}", self.last_step()) });
        }
        Ok(t as usize)
    }
}

impl Trajectory for DenseTrajectory {
    fn n_regular(&self) -> usize {
        self.states[0].len()
    }

    fn last_step(&self) -> u64 {
        (self.states.len() - 1) as u64
    }

    fn state_at(&self, t: u64) -> Result<Vec<f64>> {
        Ok(self.states[self.check(t)?].clone())
    }

    fn average_at(&self, t: u64) -> Result<Vec<f64>> {
        Ok(self.averages[self.check(t)?].clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Snapshot {
    state: Option<Vec<f64>>,
    average: Option<Vec<f64>>,
}

/// Sparse snapshots of a trajectory, as produced by
/// [`simulate`](super::simulate) or read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    n_r: usize,
    horizon: u64,
    snapshots: BTreeMap<u64, Snapshot>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    State,
    Average,
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: u64,
    pub agent_index: usize,
    pub value: f64,
    pub kind: RowKind,
}

impl Recording {
    pub fn new(n_r: usize, horizon: u64) -> Self {
        Self { n_r, horizon, snapshots: BTreeMap::new() }
    }

    pub fn push(&mut self, t: u64, state: Vec<f64>, average: Vec<f64>) {
        self.horizon = self.horizon.max(t);
        self.snapshots.insert(t, Snapshot { state: Some(state), average: Some(average) });
    }

    pub fn times(&self) -> impl Iterator<Item = u64> + '_ {
        self.snapshots.keys().copied()
    }

    fn missing(&self, t: u64, what: &str) -> Error {
        let times: Vec<String> = self
            .snapshots
            .iter()
            .filter(|(_, s)| if what == "state" { s.state.is_some() } else { s.average.is_some() })
            .map(|(t, _)| t.to_string())
            .collect();
        let shown = if times.len() > 8 {
            format!("{} recorded {what} steps ({}..={})", times.len(), times[0], times[times.len() - 1])
        } else {
            format!("recorded {what} steps [{}]", times.join(", "))
        };
        Error::InsufficientData { requested: t, available: shown }
    }

    pub fn rows(&self) -> impl Iterator<Item = TrajectoryRow> + '_ {
        self.snapshots.iter().flat_map(|(&t, snap)| {
            let states = snap.state.iter().flat_map(move |v| {
                v.iter().enumerate().map(move |(i, &value)| TrajectoryRow {
                    t,
                    agent_index: i + 1,
                    value,
                    kind: RowKind::State,
                })
            });
            let averages = snap.average.iter().flat_map(move |v| {
                v.iter().enumerate().map(move |(i, &value)| TrajectoryRow {
                    t,
                    agent_index: i + 1,
                    value,
                    kind: RowKind::Average,
                })
            });
            states.chain(averages)
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in self.rows() {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV format. When averages are missing but states cover every
    /// step from 0, the averages are rebuilt with the recursion.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut raw: BTreeMap<(u64, RowKind), BTreeMap<usize, f64>> = BTreeMap::new();
        let mut n_r = 0;
        for row in rdr.deserialize::<TrajectoryRow>() {
            let row = row?;
            if row.agent_index == 0 {
                return Err(invalid_input("agent_index is 1-based"));
            }
            if !row.value.is_finite() {
                return Err(invalid_input(format!("non-finite value at t = {}", row.t)));
            }
            n_r = n_r.max(row.agent_index);
            let slot = raw.entry((row.t, row.kind)).or_default();
            if slot.insert(row.agent_index, row.value).is_some() {
                return Err(invalid_input(format!(
                    "duplicate {:?} row for agent {} at t = {}",
                    row.kind, row.agent_index, row.t
                )));
            }
        }
        let mut rec = Recording::new(n_r, 0);
        for ((t, kind), values) in raw {
            if values.len() != n_r {
                return Err(invalid_input(format!("{kind:?} at t = {t} has {} of {n_r} agents", values.len())));
            }
            let v: Vec<f64> = values.into_values().collect();
            rec.horizon = rec.horizon.max(t);
            let snap = rec.snapshots.entry(t).or_insert(Snapshot { state: None, average: None });
            match kind {
                RowKind::State => snap.state = Some(v),
                RowKind::Average => snap.average = Some(v),
            }
        }
        rec.fill_averages();
        Ok(rec)
    }

    fn fill_averages(&mut self) {
        let contiguous = self
            .snapshots
            .iter()
            .enumerate()
            .all(|(k, (&t, s))| t == k as u64 && s.state.is_some());
        if !contiguous || self.snapshots.values().all(|s| s.average.is_some()) {
            return;
        }
        let mut prev: Option<Vec<f64>> = None;
        for (&t, snap) in self.snapshots.iter_mut() {
            let x = snap.state.as_ref().expect("checked contiguous");
            let s = match &prev {
                None => x.clone(),
                Some(p) => update_running_average(p, x, t).expect("equal lengths"),
            };
            snap.average.get_or_insert_with(|| s.clone());
            prev = Some(s);
        }
    }
}

impl Trajectory for Recording {
    fn n_regular(&self) -> usize {
        self.n_r
    }

    fn last_step(&self) -> u64 {
        self.horizon
    }

    fn state_at(&self, t: u64) -> Result<Vec<f64>> {
        self.snapshots
            .get(&t)
            .and_then(|s| s.state.clone())
            .ok_or_else(|| self.missing(t, "state"))
    }

    fn average_at(&self, t: u64) -> Result<Vec<f64>> {
        self.snapshots
            .get(&t)
            .and_then(|s| s.average.clone())
            .ok_or_else(|| self.missing(t, "average"))
    }
}
