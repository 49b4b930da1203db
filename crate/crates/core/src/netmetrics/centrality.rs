//! Node degree, eigenvector, closeness, harmonic closeness, betweenness and
//! node strength.
//!
//! Path-based measures use hop counts; edge weights only enter node
//! strength, which works on the full matrix instead of a thresholded graph.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::graph::{AssetGraph, GraphNode};
use crate::error::{Error, Result};
use crate::matrix::{LabeledMatrix, MatrixKind};
use crate::panel::{split_lag, Column, SeriesMeta};
use crate::par;

pub const EC_TOLERANCE: f64 = 1e-10;
pub const EC_MAX_STEPS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Measure {
    #[serde(rename = "ND")]
    Nd,
    #[serde(rename = "ND_in")]
    NdIn,
    #[serde(rename = "ND_out")]
    NdOut,
    #[serde(rename = "EC")]
    Ec,
    #[serde(rename = "EC_in")]
    EcIn,
    #[serde(rename = "EC_out")]
    EcOut,
    #[serde(rename = "CC")]
    Cc,
    #[serde(rename = "HC")]
    Hc,
    #[serde(rename = "HC_in")]
    HcIn,
    #[serde(rename = "HC_out")]
    HcOut,
    #[serde(rename = "BC")]
    Bc,
    #[serde(rename = "BC_dir")]
    BcDir,
    #[serde(rename = "NS")]
    Ns,
    #[serde(rename = "NS_in")]
    NsIn,
    #[serde(rename = "NS_out")]
    NsOut,
}

impl Measure {
    pub const ALL: [Measure; 15] = [
        Measure::Nd,
        Measure::NdIn,
        Measure::NdOut,
        Measure::Ec,
        Measure::EcIn,
        Measure::EcOut,
        Measure::Cc,
        Measure::Hc,
        Measure::HcIn,
        Measure::HcOut,
        Measure::Bc,
        Measure::BcDir,
        Measure::Ns,
        Measure::NsIn,
        Measure::NsOut,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Nd => "ND",
            Measure::NdIn => "ND_in",
            Measure::NdOut => "ND_out",
            Measure::Ec => "EC",
            Measure::EcIn => "EC_in",
            Measure::EcOut => "EC_out",
            Measure::Cc => "CC",
            Measure::Hc => "HC",
            Measure::HcIn => "HC_in",
            Measure::HcOut => "HC_out",
            Measure::Bc => "BC",
            Measure::BcDir => "BC_dir",
            Measure::Ns => "NS",
            Measure::NsIn => "NS_in",
            Measure::NsOut => "NS_out",
        }
    }

    pub fn smaller_is_central(self) -> bool {
        self == Measure::Cc
    }

    pub fn is_strength(self) -> bool {
        matches!(self, Measure::Ns | Measure::NsIn | Measure::NsOut)
    }

    /// Graph measures reported by default for an undirected or directed graph.
    pub fn graph_defaults(directed: bool) -> Vec<Measure> {
        if directed {
            vec![
                Measure::NdIn,
                Measure::NdOut,
                Measure::EcIn,
                Measure::EcOut,
                Measure::Cc,
                Measure::HcIn,
                Measure::HcOut,
                Measure::BcDir,
            ]
        } else {
            vec![Measure::Nd, Measure::Ec, Measure::Cc, Measure::Hc, Measure::Bc]
        }
    }

    pub fn strength_defaults(kind: MatrixKind) -> Vec<Measure> {
        if kind.is_flow() {
            vec![Measure::NsIn, Measure::NsOut]
        } else {
            vec![Measure::Ns]
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParams(format!("unknown centrality measure `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub rank: usize,
    pub label: String,
    #[serde(flatten)]
    pub meta: SeriesMeta,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityReport {
    pub nodes: Vec<GraphNode>,
    pub values: BTreeMap<Measure, Vec<f64>>,
    pub top_k: usize,
}

/// Relative tolerance under which two centrality values count as a draw.
const TIE_TOLERANCE: f64 = 1e-12;

/// Indices of the `k` largest values, plus any further entries tied with the
/// `k`-th. Ordered by value descending, then by index.
pub fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    if k == 0 || order.is_empty() {
        return Vec::new();
    }
    if k >= order.len() {
        return order;
    }
    let cutoff = values[order[k - 1]];
    let tol = TIE_TOLERANCE * cutoff.abs().max(1.0);
    order
        .into_iter()
        .enumerate()
        .take_while(|&(pos, i)| pos < k || (values[i] - cutoff).abs() <= tol)
        .map(|(_, i)| i)
        .collect()
}

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

/// `(rank, index)` pairs for the top `k` entries with ties kept. Tied values
/// share the rank of the first of them (1, 2, 2, 4, ...). `ascending` ranks
/// the smallest values first.
pub(crate) fn ranked_top(values: &[f64], k: usize, ascending: bool) -> Vec<(usize, usize)> {
    let order = if ascending {
        top_k_indices(&values.iter().map(|v| -v).collect::<Vec<_>>(), k)
    } else {
        top_k_indices(values, k)
    };
    let mut out: Vec<(usize, usize)> = Vec::with_capacity(order.len());
    for (pos, &i) in order.iter().enumerate() {
        let rank = match out.last() {
            Some(&(r, prev)) if tied(values[prev], values[i]) => r,
            _ => pos + 1,
        };
        out.push((rank, i));
    }
    out
}

impl CentralityReport {
    pub fn get(&self, measure: Measure) -> Option<&[f64]> {
        self.values.get(&measure).map(Vec::as_slice)
    }

    pub fn value_of(&self, measure: Measure, label: &str) -> Option<f64> {
        let i = self.nodes.iter().position(|n| n.label == label)?;
        self.get(measure).map(|v| v[i])
    }

    /// Top entries for `measure` ("more, in case of draws"). Closeness is a
    /// mean distance, so its smallest values come first.
    pub fn top(&self, measure: Measure) -> Vec<RankedEntry> {
        let Some(values) = self.get(measure) else {
            return Vec::new();
        };
        ranked_top(values, self.top_k, measure.smaller_is_central())
            .into_iter()
            .map(|(rank, i)| RankedEntry {
                rank,
                label: self.nodes[i].label.clone(),
                meta: self.nodes[i].meta.clone(),
                value: values[i],
            })
            .collect()
    }

    /// Copies country/industry metadata from panel columns with matching
    /// labels.
    pub fn attach_metadata(&mut self, columns: &[Column]) {
        for node in &mut self.nodes {
            if let Some(c) = columns.iter().find(|c| c.label == node.label) {
                node.meta = c.meta.clone();
            }
        }
    }

    /// Merges measures of another report over the same node list.
    pub fn merge(&mut self, other: CentralityReport) -> Result<()> {
        if self.nodes.iter().map(|n| &n.label).ne(other.nodes.iter().map(|n| &n.label)) {
            return Err(Error::LabelMismatch);
        }
        self.values.extend(other.values);
        Ok(())
    }
}

/// Hop distances from `start` following `adj`; `usize::MAX` if unreachable.
fn bfs(adj: &[Vec<usize>], start: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

fn harmonic(adj: &[Vec<usize>]) -> Vec<f64> {
    par::map_indices(adj.len(), |v| {
        bfs(adj, v)
            .into_iter()
            .filter(|&d| d != 0 && d != usize::MAX)
            .map(|d| 1.0 / d as f64)
            .sum()
    })
}

/// Mean hop distance to the nodes reachable from each node; 0 when nothing
/// is reachable.
fn closeness(adj: &[Vec<usize>]) -> Vec<f64> {
    par::map_indices(adj.len(), |v| {
        let (sum, count) = bfs(adj, v)
            .into_iter()
            .filter(|&d| d != 0 && d != usize::MAX)
            .fold((0usize, 0usize), |(s, c), d| (s + d, c + 1));
        if count == 0 {
            0.0
        } else {
            sum as f64 / count as f64
        }
    })
}

/// Brandes' accumulation over unweighted shortest paths. For undirected
/// adjacency every pair is visited from both ends, so totals are halved.
fn betweenness(adj: &[Vec<usize>], undirected: bool) -> Vec<f64> {
    let n = adj.len();
    let partial = par::map_indices(n, |s| {
        let mut stack = Vec::with_capacity(n);
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut sigma = vec![0f64; n];
        let mut dist = vec![usize::MAX; n];
        sigma[s] = 1.0;
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in &adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        let mut delta = vec![0f64; n];
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
        }
        delta[s] = 0.0;
        delta
    });
    let mut bc = vec![0f64; n];
    for delta in partial {
        for (b, d) in bc.iter_mut().zip(delta) {
            *b += d;
        }
    }
    if undirected {
        for b in &mut bc {
            *b /= 2.0;
        }
    }
    bc
}

/// Weakly connected components, each sorted, ordered by smallest member.
fn weak_components(out: &[Vec<usize>], inn: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = out.len();
    let mut comp = vec![usize::MAX; n];
    let mut comps = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut members = vec![start];
        comp[start] = id;
        let mut i = 0;
        while i < members.len() {
            let v = members[i];
            for &w in out[v].iter().chain(&inn[v]) {
                if comp[w] == usize::MAX {
                    comp[w] = id;
                    members.push(w);
                }
            }
            i += 1;
        }
        members.sort_unstable();
        comps.push(members);
    }
    comps
}

fn has_cycle(members: &[usize], out: &[Vec<usize>]) -> bool {
    let local: BTreeMap<usize, usize> = members.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut indeg = vec![0usize; members.len()];
    for &v in members {
        for w in &out[v] {
            indeg[local[w]] += 1;
        }
    }
    let mut queue: VecDeque<usize> = (0..members.len()).filter(|&i| indeg[i] == 0).collect();
    let mut seen = 0;
    while let Some(i) = queue.pop_front() {
        seen += 1;
        for w in &out[members[i]] {
            let j = local[w];
            indeg[j] -= 1;
            if indeg[j] == 0 {
                queue.push_back(j);
            }
        }
    }
    seen < members.len()
}

/// Principal eigenvector of the 0/1 adjacency (`x_v ∝ Σ_{w ∈ follow[v]} x_w`)
/// computed per weakly connected component by power iteration on `A + I`.
/// Each component's vector is scaled to unit max, then weighted by its
/// spectral radius relative to the largest one in the graph. Components with
/// zero spectral radius score 0.
fn eigenvector(follow: &[Vec<usize>], out: &[Vec<usize>], inn: &[Vec<usize>], directed: bool) -> Result<Vec<f64>> {
    let n = follow.len();
    let mut scores = vec![0f64; n];
    let mut radii = Vec::new();
    for members in weak_components(out, inn) {
        if members.len() < 2 || (directed && !has_cycle(&members, out)) {
            continue;
        }
        let mut x = vec![0f64; n];
        for &v in &members {
            x[v] = 1.0;
        }
        let mut next = vec![0f64; n];
        let mut converged = false;
        let mut growth = 0.0;
        for _ in 0..EC_MAX_STEPS {
            for &v in &members {
                next[v] = x[v] + follow[v].iter().map(|&w| x[w]).sum::<f64>();
            }
            growth = members.iter().map(|&v| next[v]).fold(0.0, f64::max);
            let mut change = 0f64;
            for &v in &members {
                let y = next[v] / growth;
                change = change.max((y - x[v]).abs());
                x[v] = y;
            }
            if change < EC_TOLERANCE {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence { steps: EC_MAX_STEPS });
        }
        for &v in &members {
            scores[v] = x[v];
        }
        radii.push((members, growth - 1.0));
    }
    let max_radius = radii.iter().map(|(_, r)| *r).fold(0.0, f64::max);
    if max_radius > 0.0 {
        for (members, r) in radii {
            for v in members {
                scores[v] *= r / max_radius;
            }
        }
    }
    Ok(scores)
}

/// Graph centralities for `measures`. Node strength is rejected here; use
/// [`strength_centralities`] on the full matrix.
pub fn graph_centralities(graph: &AssetGraph, measures: &[Measure], top_k: usize) -> Result<CentralityReport> {
    if graph.n_nodes() == 0 {
        return Err(Error::EmptyGraph);
    }
    if let Some(m) = measures.iter().find(|m| m.is_strength()) {
        return Err(Error::InvalidParams(format!("{m} needs the full matrix, not a graph")));
    }
    let out = graph.out_neighbors();
    let inn = graph.in_neighbors();
    let undirected = !graph.directed;
    let mut values = BTreeMap::new();
    for &m in measures {
        let v = match m {
            Measure::Nd | Measure::NdOut if undirected => out.iter().map(|a| a.len() as f64).collect(),
            Measure::NdIn if undirected => out.iter().map(|a| a.len() as f64).collect(),
            Measure::Nd => out.iter().zip(&inn).map(|(o, i)| (o.len() + i.len()) as f64).collect(),
            Measure::NdOut => out.iter().map(|a| a.len() as f64).collect(),
            Measure::NdIn => inn.iter().map(|a| a.len() as f64).collect(),
            Measure::Ec | Measure::EcOut => eigenvector(&out, &out, &inn, graph.directed)?,
            Measure::EcIn => eigenvector(&inn, &out, &inn, graph.directed)?,
            Measure::Cc => closeness(&out),
            Measure::Hc | Measure::HcOut => harmonic(&out),
            Measure::HcIn => harmonic(&inn),
            Measure::Bc | Measure::BcDir => betweenness(&out, undirected),
            Measure::Ns | Measure::NsIn | Measure::NsOut => unreachable!("rejected above"),
        };
        values.insert(m, v);
    }
    Ok(CentralityReport {
        nodes: graph.nodes.clone(),
        values,
        top_k,
    })
}

/// Node strength over the full matrix, diagonal excluded. For flow matrices
/// `NS_out` is the row sum (sent), `NS_in` the column sum (received) and `NS`
/// their total; for symmetric kinds `NS` is the row sum. Entries are summed
/// with their sign.
pub fn strength_centralities(matrix: &LabeledMatrix, measures: &[Measure], top_k: usize) -> Result<CentralityReport> {
    if matrix.n() == 0 {
        return Err(Error::EmptyGraph);
    }
    if let Some(m) = measures.iter().find(|m| !m.is_strength()) {
        return Err(Error::InvalidParams(format!("{m} needs a graph, not a matrix")));
    }
    let n = matrix.n();
    let row: Vec<f64> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| matrix.get(i, j)).sum())
        .collect();
    let col: Vec<f64> = (0..n)
        .map(|j| (0..n).filter(|&i| i != j).map(|i| matrix.get(i, j)).sum())
        .collect();
    let flow = matrix.kind().is_flow();
    let mut values = BTreeMap::new();
    for &m in measures {
        let v = match m {
            Measure::NsOut => row.clone(),
            Measure::NsIn => col.clone(),
            _ if flow => row.iter().zip(&col).map(|(a, b)| a + b).collect(),
            _ => row.clone(),
        };
        values.insert(m, v);
    }
    let nodes = matrix
        .labels()
        .iter()
        .map(|l| GraphNode {
            label: l.clone(),
            meta: SeriesMeta::default(),
            lag: split_lag(l).1,
        })
        .collect();
    Ok(CentralityReport { nodes, values, top_k })
}
