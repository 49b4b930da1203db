//! Fixed-width binning of return columns into symbol streams, and the joint
//! state counts every entropy estimator is built on.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::ReturnPanel;
use crate::par;

/// Default bin width for daily log-returns.
pub const DEFAULT_BIN_WIDTH: f64 = 0.1;

/// Largest history length accepted for either series.
pub const MAX_ORDER: usize = 4;

// Quotients within this distance of an integer are treated as sitting on a
// bin edge; absorbs the representation error of widths such as 0.1.
const EDGE_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BinMode {
    /// One range fitted over every column.
    #[default]
    Global,
    /// Each column gets its own range.
    PerSeries,
}

impl std::str::FromStr for BinMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(BinMode::Global),
            "per-series" => Ok(BinMode::PerSeries),
            other => Err(Error::InvalidParams(format!("unknown bin mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for BinMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BinMode::Global => "global",
            BinMode::PerSeries => "per-series",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinningSpec {
    pub lo: f64,
    pub hi: f64,
    pub width: f64,
    pub n_bins: u32,
    pub mode: BinMode,
}

fn snap(q: f64) -> f64 {
    let r = q.round();
    if (q - r).abs() < EDGE_SNAP {
        r
    } else {
        q
    }
}

impl BinningSpec {
    /// Range `[lo, hi]` over the observed extremes, rounded outward to
    /// multiples of `width`. A degenerate range is widened to one bin.
    pub fn from_range(min: f64, max: f64, width: f64, mode: BinMode) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::ZeroWidth(width));
        }
        if !(min.is_finite() && max.is_finite()) || min > max {
            return Err(Error::InvalidParams(format!("bad data range [{min}, {max}]")));
        }
        let lo_idx = snap(min / width).floor();
        let mut hi_idx = snap(max / width).ceil();
        if hi_idx <= lo_idx {
            hi_idx = lo_idx + 1.0;
        }
        let n_bins = (hi_idx - lo_idx) as u32;
        Ok(Self {
            lo: lo_idx * width,
            hi: hi_idx * width,
            width,
            n_bins,
            mode,
        })
    }

    /// Symbol in `1..=n_bins` for `x`. Bins are left-closed and right-open,
    /// except the last, which also holds `hi`.
    pub fn symbol(&self, x: f64) -> Result<u32> {
        let tol = EDGE_SNAP * self.width;
        if !(x >= self.lo - tol && x <= self.hi + tol) {
            return Err(Error::OutOfRange {
                value: x,
                lo: self.lo,
                hi: self.hi,
            });
        }
        let q = snap((x - self.lo) / self.width).floor();
        Ok((q.max(0.0) as u32 + 1).min(self.n_bins))
    }
}

/// Fits a binning over `data`. Global mode scans every column; per-series
/// mode expects exactly one.
pub fn fit_bins(data: &[&[f64]], width: f64, mode: BinMode) -> Result<BinningSpec> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::ZeroWidth(width));
    }
    if mode == BinMode::PerSeries && data.len() != 1 {
        return Err(Error::InvalidParams(format!(
            "per-series binning fits one column, got {}",
            data.len()
        )));
    }
    let mut iter = data.iter().flat_map(|c| c.iter().copied()).peekable();
    if iter.peek().is_none() {
        return Err(Error::EmptyData);
    }
    let (min, max) = iter.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
        (lo.min(x), hi.max(x))
    });
    BinningSpec::from_range(min, max, width, mode)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolSeries {
    pub symbols: Vec<u32>,
    pub spec: BinningSpec,
}

impl SymbolSeries {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Wraps raw symbols; the binning is a placeholder covering `1..=max`.
    pub fn from_symbols(symbols: Vec<u32>) -> Self {
        let n_bins = symbols.iter().copied().max().unwrap_or(1).max(1);
        Self {
            spec: BinningSpec {
                lo: 0.0,
                hi: n_bins as f64,
                width: 1.0,
                n_bins,
                mode: BinMode::PerSeries,
            },
            symbols,
        }
    }
}

pub fn symbolize(returns: &[f64], spec: &BinningSpec) -> Result<SymbolSeries> {
    let symbols = returns
        .iter()
        .map(|&x| spec.symbol(x))
        .collect::<Result<Vec<_>>>()?;
    Ok(SymbolSeries {
        symbols,
        spec: *spec,
    })
}

/// Symbolized panel: one series per column, labels carried along.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolPanel {
    pub labels: Vec<String>,
    pub series: Vec<SymbolSeries>,
}

impl SymbolPanel {
    pub fn new(labels: Vec<String>, series: Vec<SymbolSeries>) -> Result<Self> {
        if labels.len() != series.len() {
            return Err(Error::LengthMismatch {
                left: labels.len(),
                right: series.len(),
            });
        }
        if let Some(first) = series.first() {
            if let Some(s) = series.iter().find(|s| s.len() != first.len()) {
                return Err(Error::LengthMismatch {
                    left: first.len(),
                    right: s.len(),
                });
            }
        }
        Ok(Self { labels, series })
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Rows per series.
    pub fn n_rows(&self) -> usize {
        self.series.first().map_or(0, SymbolSeries::len)
    }

    /// The binning shared by every column, if there is one.
    pub fn global_spec(&self) -> Option<BinningSpec> {
        let first = self.series.first()?.spec;
        self.series
            .iter()
            .all(|s| s.spec == first)
            .then_some(first)
    }
}

/// Fits bins (globally or per column) and symbolizes every panel column.
pub fn symbolize_panel(panel: &ReturnPanel, width: f64, mode: BinMode) -> Result<SymbolPanel> {
    let columns = panel.values();
    let series = match mode {
        BinMode::Global => {
            let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
            let spec = fit_bins(&refs, width, mode)?;
            par::map_indices(columns.len(), |j| symbolize(&columns[j], &spec))
        }
        BinMode::PerSeries => par::map_indices(columns.len(), |j| {
            let spec = fit_bins(&[&columns[j]], width, mode)?;
            symbolize(&columns[j], &spec)
        }),
    };
    SymbolPanel::new(panel.labels(), series.into_iter().collect::<Result<_>>()?)
}

/// One realized joint state: the destination's next symbol, its `k` most
/// recent symbols (newest first) and the source's `l` most recent symbols.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JointState {
    pub next: u32,
    pub dest_past: Vec<u32>,
    pub source_past: Vec<u32>,
}

/// Sparse counts over realized joint states. Ordered maps keep every
/// downstream sum in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct JointCounts {
    pub k: usize,
    pub l: usize,
    pub table: BTreeMap<JointState, u64>,
    pub total: u64,
}

pub(crate) fn check_order(k: usize, l: usize) -> Result<()> {
    if (1..=MAX_ORDER).contains(&k) && (1..=MAX_ORDER).contains(&l) {
        Ok(())
    } else {
        Err(Error::InvalidOrder { k, l })
    }
}

/// Counts `(dest[n+1], dest[n..=n-k+1], source[n..=n-l+1])` for
/// `n = max(k,l)-1 ..= T-2`.
pub fn joint_counts(dest: &SymbolSeries, source: &SymbolSeries, k: usize, l: usize) -> Result<JointCounts> {
    check_order(k, l)?;
    if dest.len() != source.len() {
        return Err(Error::LengthMismatch {
            left: dest.len(),
            right: source.len(),
        });
    }
    let h = k.max(l);
    let t = dest.len();
    if t < h + 1 {
        return Err(Error::TooShort { needed: h + 1, got: t });
    }
    let (x, y) = (&dest.symbols, &source.symbols);
    let mut table = BTreeMap::new();
    for n in (h - 1)..(t - 1) {
        let state = JointState {
            next: x[n + 1],
            dest_past: (0..k).map(|i| x[n - i]).collect(),
            source_past: (0..l).map(|i| y[n - i]).collect(),
        };
        *table.entry(state).or_insert(0u64) += 1;
    }
    Ok(JointCounts {
        k,
        l,
        table,
        total: (t - h) as u64,
    })
}

impl JointCounts {
    /// Counts of `(next, dest_past)`.
    pub fn next_and_dest_past(&self) -> BTreeMap<(u32, Vec<u32>), u64> {
        let mut m = BTreeMap::new();
        for (s, &c) in &self.table {
            *m.entry((s.next, s.dest_past.clone())).or_insert(0) += c;
        }
        m
    }

    /// Counts of `(dest_past, source_past)`.
    pub fn dest_and_source_past(&self) -> BTreeMap<(Vec<u32>, Vec<u32>), u64> {
        let mut m = BTreeMap::new();
        for (s, &c) in &self.table {
            *m.entry((s.dest_past.clone(), s.source_past.clone()))
                .or_insert(0) += c;
        }
        m
    }

    /// Counts of `dest_past`.
    pub fn dest_past(&self) -> BTreeMap<Vec<u32>, u64> {
        let mut m = BTreeMap::new();
        for (s, &c) in &self.table {
            *m.entry(s.dest_past.clone()).or_insert(0) += c;
        }
        m
    }
}
