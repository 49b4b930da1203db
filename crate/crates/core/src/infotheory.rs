//! Plug-in (maximum likelihood) entropy estimators on symbol streams and the
//! all-pairs transfer entropy driver.
//!
//! All quantities are in bits. Zero-probability states never enter a sum.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use crate::discretize::{check_order, joint_counts, JointCounts, SymbolPanel, SymbolSeries};
use crate::error::{Error, Result};
use crate::matrix::{LabeledMatrix, MatrixKind};
use crate::par;

fn plogp_sum<I: IntoIterator<Item = u64>>(counts: I, total: u64) -> f64 {
    let total = total as f64;
    -counts
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / total;
            p * p.log2()
        })
        .sum::<f64>()
}

fn dense_counts(symbols: &[u32]) -> Vec<u64> {
    let max = symbols.iter().copied().max().unwrap_or(0) as usize;
    let mut counts = vec![0u64; max + 1];
    for &s in symbols {
        counts[s as usize] += 1;
    }
    counts
}

/// `H = -sum p_i log2 p_i` over the observed symbols.
pub fn shannon_entropy(sym: &SymbolSeries) -> Result<f64> {
    if sym.is_empty() {
        return Err(Error::EmptyData);
    }
    Ok(plogp_sum(dense_counts(&sym.symbols), sym.len() as u64).max(0.0))
}

/// `H(X|Y) = -sum p(i,j) log2 [p(i,j) / p(j)]`, pairing `x[t]` with `y[t]`.
pub fn conditional_entropy(x: &SymbolSeries, y: &SymbolSeries) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::EmptyData);
    }
    Ok(conditional_entropy_of_pairs(
        x.symbols.iter().copied().zip(y.symbols.iter().copied()),
    ))
}

fn conditional_entropy_of_pairs(pairs: impl Iterator<Item = (u32, u32)>) -> f64 {
    let mut joint: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    let mut cond: BTreeMap<u32, u64> = BTreeMap::new();
    let mut total = 0u64;
    for (a, b) in pairs {
        *joint.entry((a, b)).or_insert(0) += 1;
        *cond.entry(b).or_insert(0) += 1;
        total += 1;
    }
    let total = total as f64;
    let h = -joint
        .iter()
        .map(|(&(_, b), &c)| {
            let p = c as f64 / total;
            p * (c as f64 / cond[&b] as f64).log2()
        })
        .sum::<f64>();
    h.max(0.0)
}

/// Entropy of the next symbol given the current one, `H(X^F | X^P)`.
pub fn self_conditional_entropy(x: &SymbolSeries) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: x.len(),
        });
    }
    let s = &x.symbols;
    Ok(conditional_entropy_of_pairs(
        s.windows(2).map(|w| (w[1], w[0])),
    ))
}

/// Transfer entropy from `source` to `dest` with destination history `k` and
/// source history `l`.
pub fn transfer_entropy(dest: &SymbolSeries, source: &SymbolSeries, k: usize, l: usize) -> Result<f64> {
    check_order(k, l)?;
    if dest.len() != source.len() {
        return Err(Error::LengthMismatch {
            left: dest.len(),
            right: source.len(),
        });
    }
    let needed = k.max(l) + 2;
    if dest.len() < needed {
        return Err(Error::TooShort {
            needed,
            got: dest.len(),
        });
    }
    if k == 1 && l == 1 {
        let bins = dest
            .symbols
            .iter()
            .chain(&source.symbols)
            .copied()
            .max()
            .unwrap_or(1) as usize;
        let ctx = DestContext::new(&dest.symbols, bins);
        let mut scratch = PairScratch::default();
        Ok(ctx.transfer_entropy(&source.symbols, &mut scratch))
    } else {
        Ok(te_two_sum(&joint_counts(dest, source, k, l)?))
    }
}

/// Transfer entropy from counts in the conditional-probability form
/// `sum p log2 p(next|dest,src) - sum p log2 p(next|dest)`.
pub fn te_two_sum(counts: &JointCounts) -> f64 {
    let total = counts.total as f64;
    let nd = counts.next_and_dest_past();
    let ds = counts.dest_and_source_past();
    let d = counts.dest_past();
    let mut with_source = 0.0;
    let mut without_source = 0.0;
    for (s, &c) in &counts.table {
        let p = c as f64 / total;
        let n_ds = ds[&(s.dest_past.clone(), s.source_past.clone())] as f64;
        let n_nd = nd[&(s.next, s.dest_past.clone())] as f64;
        let n_d = d[&s.dest_past] as f64;
        with_source += p * (c as f64 / n_ds).log2();
        without_source += p * (n_nd / n_d).log2();
    }
    with_source - without_source
}

/// Transfer entropy from counts in the single log-ratio form
/// `sum p log2 [p(n,d,s) p(d) / (p(n,d) p(d,s))]`.
pub fn te_log_ratio(counts: &JointCounts) -> f64 {
    let total = counts.total as f64;
    let nd = counts.next_and_dest_past();
    let ds = counts.dest_and_source_past();
    let d = counts.dest_past();
    counts
        .table
        .iter()
        .map(|(s, &c)| {
            let n_ds = ds[&(s.dest_past.clone(), s.source_past.clone())] as f64;
            let n_nd = nd[&(s.next, s.dest_past.clone())] as f64;
            let n_d = d[&s.dest_past] as f64;
            (c as f64 / total) * ((c as f64 * n_d) / (n_nd * n_ds)).log2()
        })
        .sum()
}

/// Per-destination tables for the k = l = 1 kernel. The `(next, current)`
/// pairs actually realized are numbered compactly so the triple table is
/// `pairs x bins` rather than `bins^3`.
pub(crate) struct DestContext {
    bins: usize,
    pair_of_row: Vec<u32>,
    current: Vec<u32>,
    pair_counts: Vec<u64>,
    pair_current: Vec<u32>,
    current_counts: Vec<u64>,
}

#[derive(Default)]
pub(crate) struct PairScratch {
    triple: Vec<u32>,
    triple_touched: Vec<u32>,
    past: Vec<u32>,
}

impl DestContext {
    /// `bins` must be at least the largest symbol in any series the context
    /// is paired with.
    pub(crate) fn new(x: &[u32], bins: usize) -> Self {
        let rows = x.len() - 1;
        let mut id_of = vec![u32::MAX; (bins + 1) * (bins + 1)];
        let mut pair_of_row = Vec::with_capacity(rows);
        let mut pair_counts = Vec::new();
        let mut pair_current = Vec::new();
        let mut current_counts = vec![0u64; bins + 1];
        for n in 0..rows {
            let (next, cur) = (x[n + 1] as usize, x[n] as usize);
            let slot = &mut id_of[next * (bins + 1) + cur];
            if *slot == u32::MAX {
                *slot = pair_counts.len() as u32;
                pair_counts.push(0);
                pair_current.push(cur as u32);
            }
            pair_counts[*slot as usize] += 1;
            pair_of_row.push(*slot);
            current_counts[cur] += 1;
        }
        Self {
            bins: bins + 1,
            pair_of_row,
            current: x[..rows].to_vec(),
            pair_counts,
            pair_current,
            current_counts,
        }
    }

    pub(crate) fn transfer_entropy(&self, y: &[u32], scratch: &mut PairScratch) -> f64 {
        let b = self.bins;
        let triple_len = self.pair_counts.len() * b;
        if scratch.triple.len() < triple_len {
            scratch.triple.resize(triple_len, 0);
        }
        if scratch.past.len() < b * b {
            scratch.past.resize(b * b, 0);
        }
        let triple = &mut scratch.triple;
        let past = &mut scratch.past;
        let touched = &mut scratch.triple_touched;
        touched.clear();
        for (n, &pair) in self.pair_of_row.iter().enumerate() {
            let src = y[n] as usize;
            let t = pair as usize * b + src;
            if triple[t] == 0 {
                touched.push(t as u32);
            }
            triple[t] += 1;
            past[self.current[n] as usize * b + src] += 1;
        }
        let mut acc = 0.0;
        for &t in touched.iter() {
            let t = t as usize;
            let (pair, src) = (t / b, t % b);
            let cur = self.pair_current[pair] as usize;
            let n_triple = triple[t] as f64;
            let n_pair = self.pair_counts[pair] as f64;
            let n_past = past[cur * b + src] as f64;
            let n_cur = self.current_counts[cur] as f64;
            acc += n_triple * ((n_triple * n_cur) / (n_pair * n_past)).ln();
        }
        // Reset only what was written.
        for &t in touched.iter() {
            let t = t as usize;
            let (pair, src) = (t / b, t % b);
            triple[t] = 0;
            past[self.pair_current[pair] as usize * b + src] = 0;
        }
        acc / (self.pair_of_row.len() as f64 * LN_2)
    }
}

/// All-pairs transfer entropy: `values[s][d]` is the flow from column `s` to
/// column `d`. The diagonal is evaluated like any other entry.
pub fn te_matrix(panel: &SymbolPanel, k: usize, l: usize) -> Result<LabeledMatrix> {
    check_order(k, l)?;
    let n = panel.len();
    if n == 0 {
        return Err(Error::ShapeTooSmall("empty panel".into()));
    }
    let rows = panel.n_rows();
    let needed = k.max(l) + 2;
    if rows < needed {
        return Err(Error::TooShort { needed, got: rows });
    }
    let series = &panel.series;
    let columns: Vec<Vec<f64>> = if k == 1 && l == 1 {
        let bins = series
            .iter()
            .flat_map(|s| s.symbols.iter().copied())
            .max()
            .unwrap_or(1) as usize;
        par::map_indices_with(n, PairScratch::default, |scratch, d| {
            let ctx = DestContext::new(&series[d].symbols, bins);
            series
                .iter()
                .map(|s| ctx.transfer_entropy(&s.symbols, scratch))
                .collect()
        })
    } else {
        par::map_indices(n, |d| {
            series
                .iter()
                .enumerate()
                .map(|(s, src)| {
                    joint_counts(&series[d], src, k, l)
                        .map(|c| te_two_sum(&c))
                        .map_err(|e| Error::Pair {
                            source_label: panel.labels[s].clone(),
                            dest_label: panel.labels[d].clone(),
                            source: Box::new(e),
                        })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .into_iter()
        .collect::<Result<_>>()?
    };
    let mut out = LabeledMatrix::zeros(panel.labels.clone(), MatrixKind::Te)?;
    for (d, col) in columns.iter().enumerate() {
        for (s, &v) in col.iter().enumerate() {
            out.set(s, d, v);
        }
    }
    Ok(out)
}

/// `H(X^F | X^P)` of every column.
pub fn self_conditional_entropies(panel: &SymbolPanel) -> Result<Vec<f64>> {
    par::map_indices(panel.len(), |j| self_conditional_entropy(&panel.series[j]))
        .into_iter()
        .collect()
}
