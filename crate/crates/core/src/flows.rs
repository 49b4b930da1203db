//! Crisis-group analysis: swap a group of stocks into a base panel and rank
//! which outside stocks receive the most effective transfer entropy from the
//! group's lagged returns, and which group members send the most.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{LabeledMatrix, MatrixKind};
use crate::netmetrics::{ranked_top, RankedEntry};
use crate::panel::{augment_lagged, build_panel, lagged_label, split_lag, Column, PriceSeries, ReturnPanel, SeriesMeta, TradingCalendar};

pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpec {
    pub name: String,
    pub remove_labels: Vec<String>,
    pub add_series: Vec<PriceSeries>,
}

impl GroupSpec {
    /// Tickers whose lagged columns count as the group's sources.
    pub fn member_labels(&self) -> Vec<String> {
        self.add_series.iter().map(|s| s.ticker.clone()).collect()
    }
}

/// Base series minus `remove_labels` plus `add_series`, as a lag-augmented
/// panel (lag 0 and lag 1).
pub fn build_group_panel(base: &[PriceSeries], group: &GroupSpec, cal: &TradingCalendar) -> Result<ReturnPanel> {
    let base_labels: HashSet<&str> = base.iter().map(|s| s.ticker.as_str()).collect();
    let mut removed = HashSet::new();
    for label in &group.remove_labels {
        if !base_labels.contains(label.as_str()) {
            return Err(Error::UnknownLabel(label.clone()));
        }
        if !removed.insert(label.as_str()) {
            return Err(Error::DuplicateLabel(label.clone()));
        }
    }
    let mut series: Vec<PriceSeries> = base
        .iter()
        .filter(|s| !removed.contains(s.ticker.as_str()))
        .cloned()
        .collect();
    let mut present: HashSet<String> = series.iter().map(|s| s.ticker.clone()).collect();
    for s in &group.add_series {
        if !present.insert(s.ticker.clone()) {
            return Err(Error::DuplicateLabel(s.ticker.clone()));
        }
        series.push(s.clone());
    }
    augment_lagged(&build_panel(&series, cal)?, 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowEntry {
    pub label: String,
    #[serde(flatten)]
    pub meta: SeriesMeta,
    pub score: f64,
}

/// Full reception and emission rankings for one group, sorted by score
/// descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub group: String,
    pub receivers: Vec<FlowEntry>,
    pub senders: Vec<FlowEntry>,
    pub top_k: usize,
}

impl FlowReport {
    pub fn top_receivers(&self) -> Vec<RankedEntry> {
        top_entries(&self.receivers, self.top_k)
    }

    pub fn top_senders(&self) -> Vec<RankedEntry> {
        top_entries(&self.senders, self.top_k)
    }

    /// Fills country/industry fields from panel columns.
    pub fn attach_metadata(&mut self, columns: &[Column]) {
        let meta: HashMap<&str, &SeriesMeta> = columns.iter().map(|c| (c.ticker.as_str(), &c.meta)).collect();
        for e in self.receivers.iter_mut().chain(&mut self.senders) {
            if let Some(m) = meta.get(e.label.as_str()) {
                e.meta = (*m).clone();
            }
        }
    }
}

fn top_entries(entries: &[FlowEntry], k: usize) -> Vec<RankedEntry> {
    let scores: Vec<f64> = entries.iter().map(|e| e.score).collect();
    ranked_top(&scores, k, false)
        .into_iter()
        .map(|(rank, i)| RankedEntry {
            rank,
            label: entries[i].label.clone(),
            meta: entries[i].meta.clone(),
            value: entries[i].score,
        })
        .collect()
}

struct Partition {
    sources: Vec<(usize, String)>,
    targets: Vec<(usize, String)>,
}

/// Lagged group columns as sources; lag-0 columns outside the group as
/// targets.
fn partition(ete: &LabeledMatrix, group_labels: &[String]) -> Result<Partition> {
    ete.expect_kind(&[MatrixKind::Ete])?;
    let group: HashSet<&str> = group_labels.iter().map(|l| split_lag(l).0).collect();
    let mut sources = Vec::with_capacity(group.len());
    for g in group_labels {
        let base = split_lag(g).0;
        let lagged = lagged_label(base, 1);
        let i = ete.index_of(&lagged).ok_or_else(|| Error::UnknownLabel(lagged.clone()))?;
        if !sources.iter().any(|(j, _)| *j == i) {
            sources.push((i, base.to_string()));
        }
    }
    let targets = ete
        .labels()
        .iter()
        .enumerate()
        .filter(|(_, l)| {
            let (base, lag) = split_lag(l);
            lag == 0 && !group.contains(base)
        })
        .map(|(i, l)| (i, l.clone()))
        .collect();
    Ok(Partition { sources, targets })
}

fn ranked(mut entries: Vec<FlowEntry>) -> Vec<FlowEntry> {
    entries.sort_by(|a, b| b.score.total_cmp(&a.score));
    entries
}

/// For every lag-0 column outside the group, the summed ETE it receives from
/// the group's lagged columns. Negative entries count as they are.
pub fn reception_ranking(ete: &LabeledMatrix, group_labels: &[String]) -> Result<Vec<FlowEntry>> {
    let p = partition(ete, group_labels)?;
    Ok(ranked(
        p.targets
            .into_iter()
            .map(|(d, label)| FlowEntry {
                label,
                meta: SeriesMeta::default(),
                score: p.sources.iter().map(|&(s, _)| ete.get(s, d)).sum(),
            })
            .collect(),
    ))
}

/// For every lagged group column, the summed ETE it sends to lag-0 columns
/// outside the group. Entries are labelled by ticker.
pub fn emission_ranking(ete: &LabeledMatrix, group_labels: &[String]) -> Result<Vec<FlowEntry>> {
    let p = partition(ete, group_labels)?;
    Ok(ranked(
        p.sources
            .iter()
            .map(|(s, label)| FlowEntry {
                label: label.clone(),
                meta: SeriesMeta::default(),
                score: p.targets.iter().map(|&(d, _)| ete.get(*s, d)).sum(),
            })
            .collect(),
    ))
}

pub fn flow_report(name: &str, ete: &LabeledMatrix, group_labels: &[String], top_k: usize) -> Result<FlowReport> {
    Ok(FlowReport {
        group: name.to_string(),
        receivers: reception_ranking(ete, group_labels)?,
        senders: emission_ranking(ete, group_labels)?,
        top_k,
    })
}
