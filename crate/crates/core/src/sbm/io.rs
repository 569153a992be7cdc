//! Graph file formats.
//!
//! JSON: `{"n_r", "n_s", "edges": [[i, j], ...], "stubborn_opinions": [...]}`
//! with an optional `"labels"` array holding the ground truth.
//!
//! Edge list: `# key values...` header lines followed by one `i j` pair per line.
//! Agent ids are 1-based in both formats.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{CommunityStructure, Edge, SampledGraph};
use crate::error::{invalid_input, Result};

/// A graph together with the stubborn opinions and, when known, the
/// regular agents' ground-truth communities.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub graph: SampledGraph,
    pub stubborn_opinions: Vec<f64>,
    pub truth: Option<CommunityStructure>,
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    n_r: usize,
    n_s: usize,
    edges: Vec<[usize; 2]>,
    stubborn_opinions: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<CommunityStructure>,
}

impl Network {
    pub fn new(graph: SampledGraph, stubborn_opinions: Vec<f64>, truth: Option<CommunityStructure>) -> Result<Self> {
        if stubborn_opinions.len() != graph.n_stubborn() {
            return Err(invalid_input(format!(
                "{} stubborn opinions for {} stubborn agents",
                stubborn_opinions.len(),
                graph.n_stubborn()
            )));
        }
        if let Some(bad) = stubborn_opinions.iter().find(|z| !z.is_finite()) {
            return Err(invalid_input(format!("stubborn opinion {bad} is not finite")));
        }
        if let Some(t) = &truth {
            if t.len() != graph.n_regular() {
                return Err(invalid_input(format!(
                    "{} labels for {} regular agents",
                    t.len(),
                    graph.n_regular()
                )));
            }
        }
        Ok(Self { graph, stubborn_opinions, truth })
    }

    /// Ground truth, falling back to the canonical SBM-S split.
    pub fn truth_or_canonical(&self) -> CommunityStructure {
        self.truth
            .clone()
            .unwrap_or_else(|| CommunityStructure::canonical(self.graph.n_regular()))
    }

    fn to_file(&self) -> NetworkFile {
        NetworkFile {
            n_r: self.graph.n_regular(),
            n_s: self.graph.n_stubborn(),
            edges: self.graph.edges().iter().map(|e| [e.0 + 1, e.1 + 1]).collect(),
            stubborn_opinions: self.stubborn_opinions.clone(),
            labels: self.truth.clone(),
        }
    }

    fn from_file(f: NetworkFile) -> Result<Self> {
        let edges = f
            .edges
            .iter()
            .map(|&[i, j]| {
                if i == 0 || j == 0 {
                    Err(invalid_input("agent ids are 1-based"))
                } else {
                    Ok(Edge::new(i - 1, j - 1))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let graph = SampledGraph::from_edges(f.n_r, f.n_s, edges)?;
        Self::new(graph, f.stubborn_opinions, f.labels)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(s)?)
    }

    pub fn to_edge_list(&self) -> String {
        let f = self.to_file();
        let mut out = String::new();
        let join = |v: &mut dyn Iterator<Item = String>| v.collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "# n_r {}", f.n_r);
        let _ = writeln!(out, "# n_s {}", f.n_s);
        let _ = writeln!(
            out,
            "# stubborn_opinions {}",
            join(&mut f.stubborn_opinions.iter().map(|z| z.to_string()))
        );
        if let Some(labels) = &f.labels {
            let _ = writeln!(out, "# labels {}", join(&mut labels.labels().iter().map(|l| l.to_string())));
        }
        for [i, j] in f.edges {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }

    pub fn from_edge_list(s: &str) -> Result<Self> {
        let mut n_r = None;
        let mut n_s = None;
        let mut stubborn_opinions = Vec::new();
        let mut labels = None;
        let mut edges = Vec::new();
        for (lineno, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| invalid_input(format!("line {}: {what}: {line:?}", lineno + 1));
            if let Some(header) = line.strip_prefix('#') {
                let mut parts = header.split_whitespace();
                match parts.next() {
                    Some("n_r") => n_r = Some(parts.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("bad n_r"))?),
                    Some("n_s") => n_s = Some(parts.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("bad n_s"))?),
                    Some("stubborn_opinions") => {
                        stubborn_opinions = parts
                            .map(|v| v.parse::<f64>().map_err(|_| bad("bad opinion")))
                            .collect::<Result<_>>()?;
                    }
                    Some("labels") => {
                        let l = parts
                            .map(|v| v.parse::<u8>().map_err(|_| bad("bad label")))
                            .collect::<Result<Vec<_>>>()?;
                        labels = Some(CommunityStructure::new(l)?);
                    }
                    _ => {}
                }
                continue;
            }
            let mut parts = line.split_whitespace().map(|v| v.parse::<usize>());
            match (parts.next(), parts.next(), parts.next()) {
                (Some(Ok(i)), Some(Ok(j)), None) if i > 0 && j > 0 => edges.push([i, j]),
                _ => return Err(bad("expected two 1-based agent ids")),
            }
        }
        let n_r = n_r.ok_or_else(|| invalid_input("missing '# n_r' header"))?;
        let n_s = n_s.unwrap_or(0);
        Self::from_file(NetworkFile { n_r, n_s, edges, stubborn_opinions, labels })
    }
}
