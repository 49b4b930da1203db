use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{LabeledMatrix, MatrixKind};
use crate::panel::{split_lag, Column, SeriesMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    /// Keep entries strictly below the threshold (distances).
    KeepBelow,
    /// Keep entries strictly above the threshold (flow scores).
    KeepAbove,
}

impl ThresholdMode {
    pub fn default_for(kind: MatrixKind) -> Self {
        if kind == MatrixKind::Distance {
            ThresholdMode::KeepBelow
        } else {
            ThresholdMode::KeepAbove
        }
    }

    fn passes(self, value: f64, threshold: f64) -> bool {
        match self {
            ThresholdMode::KeepBelow => value < threshold,
            ThresholdMode::KeepAbove => value > threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub label: String,
    #[serde(flatten)]
    pub meta: SeriesMeta,
    pub lag: usize,
}

/// Edge between node indices; for directed graphs `source -> target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<Edge>,
    pub directed: bool,
    pub threshold: f64,
    pub mode: ThresholdMode,
}

/// Keeps the matrix entries that pass `threshold` under `mode` (strict
/// comparison) and drops nodes left without edges.
///
/// Distance matrices must use [`ThresholdMode::KeepBelow`]; flow matrices
/// use [`ThresholdMode::KeepAbove`] and yield directed graphs.
pub fn asset_graph(matrix: &LabeledMatrix, threshold: f64, mode: ThresholdMode) -> Result<AssetGraph> {
    if !threshold.is_finite() {
        return Err(Error::InvalidParams(format!("threshold {threshold} is not finite")));
    }
    let kind = matrix.kind();
    let allowed = match kind {
        MatrixKind::Distance => mode == ThresholdMode::KeepBelow,
        MatrixKind::Correlation => true,
        _ => mode == ThresholdMode::KeepAbove,
    };
    if !allowed {
        return Err(Error::KindMismatch {
            expected: format!("a matrix usable with {mode:?}"),
            got: kind.to_string(),
        });
    }
    let directed = kind.is_flow();
    let n = matrix.n();
    let mut raw = Vec::new();
    for i in 0..n {
        let start = if directed { 0 } else { i + 1 };
        for j in start..n {
            if i != j && mode.passes(matrix.get(i, j), threshold) {
                raw.push((i, j, matrix.get(i, j)));
            }
        }
    }
    let mut used = vec![false; n];
    for &(i, j, _) in &raw {
        used[i] = true;
        used[j] = true;
    }
    let mut remap = vec![usize::MAX; n];
    let mut nodes = Vec::new();
    for (i, _) in used.iter().enumerate().filter(|(_, &u)| u) {
        remap[i] = nodes.len();
        let label = matrix.labels()[i].clone();
        let lag = split_lag(&label).1;
        nodes.push(GraphNode {
            label,
            meta: SeriesMeta::default(),
            lag,
        });
    }
    let edges = raw
        .into_iter()
        .map(|(i, j, w)| Edge {
            source: remap[i],
            target: remap[j],
            weight: w,
        })
        .collect();
    Ok(AssetGraph {
        nodes,
        edges,
        directed,
        threshold,
        mode,
    })
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

impl AssetGraph {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.label == label)
    }

    /// Builds a graph directly from labelled edges, e.g. for tests or
    /// external edge lists.
    pub fn from_edges(labels: &[&str], edges: &[(usize, usize)], directed: bool) -> Result<Self> {
        if let Some(&(a, b)) = edges.iter().find(|&&(a, b)| a == b || a >= labels.len() || b >= labels.len()) {
            return Err(Error::InvalidParams(format!("bad edge ({a}, {b})")));
        }
        Ok(Self {
            nodes: labels
                .iter()
                .map(|l| GraphNode {
                    label: l.to_string(),
                    meta: SeriesMeta::default(),
                    lag: split_lag(l).1,
                })
                .collect(),
            edges: edges
                .iter()
                .map(|&(source, target)| Edge {
                    source,
                    target,
                    weight: 1.0,
                })
                .collect(),
            directed,
            threshold: f64::NAN,
            mode: ThresholdMode::KeepAbove,
        })
    }

    /// Outgoing neighbours (all neighbours when undirected), deduplicated
    /// and sorted.
    pub fn out_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes()];
        for e in &self.edges {
            adj[e.source].push(e.target);
            if !self.directed {
                adj[e.target].push(e.source);
            }
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }

    /// Incoming neighbours (all neighbours when undirected).
    pub fn in_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes()];
        for e in &self.edges {
            adj[e.target].push(e.source);
            if !self.directed {
                adj[e.source].push(e.target);
            }
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }

    /// Copies country/industry metadata from panel columns with matching
    /// labels.
    pub fn attach_metadata(&mut self, columns: &[Column]) {
        let by_label: HashMap<&str, &Column> = columns.iter().map(|c| (c.label.as_str(), c)).collect();
        for node in &mut self.nodes {
            if let Some(c) = by_label.get(node.label.as_str()) {
                node.meta = c.meta.clone();
                node.lag = c.lag;
            }
        }
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::new();
        let (kw, arrow) = if self.directed {
            ("digraph", "->")
        } else {
            ("graph", "--")
        };
        let _ = writeln!(out, "{kw} asset_graph {{");
        let _ = writeln!(out, "  // threshold={} mode={:?}", self.threshold, self.mode);
        for n in &self.nodes {
            let _ = writeln!(
                out,
                "  \"{}\" [country=\"{}\", industry=\"{}\", sub_industry=\"{}\", lag={}];",
                escape(&n.label),
                escape(&n.meta.country),
                escape(&n.meta.industry),
                escape(&n.meta.sub_industry),
                n.lag
            );
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  \"{}\" {arrow} \"{}\" [weight={}];",
                escape(&self.nodes[e.source].label),
                escape(&self.nodes[e.target].label),
                e.weight
            );
        }
        out.push_str("}\n");
        out
    }

    /// Edge list as CSV with header `source,target,weight`.
    pub fn edges_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["source", "target", "weight"])?;
        for e in &self.edges {
            w.write_record([
                self.nodes[e.source].label.as_str(),
                self.nodes[e.target].label.as_str(),
                &e.weight.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidParams(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}
