//! Price ingestion, calendar alignment, log-returns and lag-augmented panels.

use std::collections::HashSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Classification fields carried alongside every series.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub country: String,
    pub industry: String,
    pub sub_industry: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub ticker: String,
    pub meta: SeriesMeta,
    dates: Vec<NaiveDate>,
    closes: Vec<f64>,
}

impl PriceSeries {
    /// Builds a series, checking that dates are strictly increasing and
    /// closes are positive.
    pub fn new(
        ticker: impl Into<String>,
        meta: SeriesMeta,
        dates: Vec<NaiveDate>,
        closes: Vec<f64>,
    ) -> Result<Self> {
        let ticker = ticker.into();
        if dates.len() != closes.len() {
            return Err(Error::for_series(
                &ticker,
                Error::LengthMismatch {
                    left: dates.len(),
                    right: closes.len(),
                },
            ));
        }
        if dates.is_empty() {
            return Err(Error::for_series(&ticker, Error::EmptySeries));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::for_series(
                &ticker,
                Error::InvalidSeries(format!("dates not increasing at {}", w[1])),
            ));
        }
        if let Some((index, &value)) = closes
            .iter()
            .enumerate()
            .find(|(_, &c)| !(c > 0.0 && c.is_finite()))
        {
            return Err(Error::for_series(
                &ticker,
                Error::NonPositivePrice { index, value },
            ));
        }
        Ok(Self {
            ticker,
            meta,
            dates,
            closes,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn closes(&self) -> &[f64] {
        &self.closes
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

/// Trading days of the benchmark exchange.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TradingCalendar {
    dates: Vec<NaiveDate>,
}

impl TradingCalendar {
    pub fn new(dates: Vec<NaiveDate>) -> Result<Self> {
        if dates.is_empty() {
            return Err(Error::InvalidParams("calendar is empty".into()));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParams(format!(
                "calendar dates not increasing at {}",
                w[1]
            )));
        }
        Ok(Self { dates })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

/// Maps a series onto the calendar. Calendar days without a close repeat the
/// previous close; series days off the calendar are dropped.
pub fn align_to_calendar(series: &PriceSeries, cal: &TradingCalendar) -> Result<PriceSeries> {
    if series.is_empty() {
        return Err(Error::for_series(&series.ticker, Error::EmptySeries));
    }
    let mut closes = Vec::with_capacity(cal.len());
    let mut cursor = 0usize;
    let mut last: Option<f64> = None;
    for &day in cal.dates() {
        while cursor < series.dates.len() && series.dates[cursor] <= day {
            last = Some(series.closes[cursor]);
            cursor += 1;
        }
        match last {
            Some(c) => closes.push(c),
            None => {
                return Err(Error::for_series(
                    &series.ticker,
                    Error::NoPriorClose { date: day },
                ))
            }
        }
    }
    Ok(PriceSeries {
        ticker: series.ticker.clone(),
        meta: series.meta.clone(),
        dates: cal.dates().to_vec(),
        closes,
    })
}

/// `out[t] = ln(closes[t+1]) - ln(closes[t])`.
pub fn log_returns(closes: &[f64]) -> Result<Vec<f64>> {
    if closes.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: closes.len(),
        });
    }
    if let Some((index, &value)) = closes
        .iter()
        .enumerate()
        .find(|(_, &c)| !(c > 0.0 && c.is_finite()))
    {
        return Err(Error::NonPositivePrice { index, value });
    }
    Ok(closes
        .windows(2)
        .map(|w| w[1].ln() - w[0].ln())
        .collect())
}

/// Label of a column lagged by `lag` days: the base label followed by one
/// `*` per day.
pub fn lagged_label(base: &str, lag: usize) -> String {
    format!("{base}{}", "*".repeat(lag))
}

/// Splits a label into its base and lag (`"JPM**"` -> `("JPM", 2)`).
pub fn split_lag(label: &str) -> (&str, usize) {
    let base = label.trim_end_matches('*');
    (base, label.len() - base.len())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub label: String,
    pub ticker: String,
    #[serde(flatten)]
    pub meta: SeriesMeta,
    pub lag: usize,
}

/// Rectangular T x N panel of log-returns, stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    dates: Vec<NaiveDate>,
    columns: Vec<Column>,
    values: Vec<Vec<f64>>,
}

impl ReturnPanel {
    pub fn new(dates: Vec<NaiveDate>, columns: Vec<Column>, values: Vec<Vec<f64>>) -> Result<Self> {
        if columns.len() != values.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} columns but {} value vectors",
                columns.len(),
                values.len()
            )));
        }
        let mut seen = HashSet::new();
        for (col, v) in columns.iter().zip(&values) {
            if !seen.insert(col.label.as_str()) {
                return Err(Error::DuplicateLabel(col.label.clone()));
            }
            if v.len() != dates.len() {
                return Err(Error::ShapeMismatch(format!(
                    "column `{}` has {} values for {} dates",
                    col.label,
                    v.len(),
                    dates.len()
                )));
            }
            if let Some(x) = v.iter().find(|x| !x.is_finite()) {
                return Err(Error::InvalidSeries(format!(
                    "column `{}` holds non-finite value {x}",
                    col.label
                )));
            }
        }
        Ok(Self {
            dates,
            columns,
            values,
        })
    }

    /// Convenience constructor for unlabelled synthetic data: columns get
    /// lag 0, empty metadata, and dates counting up from 2000-01-03.
    pub fn from_columns(labels: &[&str], values: Vec<Vec<f64>>) -> Result<Self> {
        let rows = values.first().map_or(0, Vec::len);
        let start = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
        let dates = start.iter_days().take(rows).collect();
        let columns = labels
            .iter()
            .map(|l| {
                let (base, lag) = split_lag(l);
                Column {
                    label: l.to_string(),
                    ticker: base.to_string(),
                    meta: SeriesMeta::default(),
                    lag,
                }
            })
            .collect();
        Self::new(dates, columns, values)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn column_values(&self, index: usize) -> &[f64] {
        &self.values[index]
    }

    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn labels(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.label.clone()).collect()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.label == label)
    }

    /// Value at row `t` of the column `label`.
    pub fn get(&self, t: usize, label: &str) -> Option<f64> {
        self.index_of(label).and_then(|j| self.values[j].get(t).copied())
    }
}

/// Aligns every series to `cal` and assembles one lag-0 return column per
/// series, in input order. The panel has `cal.len() - 1` rows.
pub fn build_panel(series_set: &[PriceSeries], cal: &TradingCalendar) -> Result<ReturnPanel> {
    if series_set.len() < 2 {
        return Err(Error::ShapeTooSmall(format!(
            "need at least 2 series, got {}",
            series_set.len()
        )));
    }
    if cal.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: cal.len(),
        });
    }
    let mut seen = HashSet::new();
    for s in series_set {
        if !seen.insert(s.ticker.as_str()) {
            return Err(Error::DuplicateLabel(s.ticker.clone()));
        }
    }
    let returns = par::map_indices(series_set.len(), |i| {
        let s = &series_set[i];
        let aligned = align_to_calendar(s, cal)?;
        log_returns(aligned.closes()).map_err(|e| Error::for_series(&s.ticker, e))
    });
    let values = returns.into_iter().collect::<Result<Vec<_>>>()?;
    let columns = series_set
        .iter()
        .map(|s| Column {
            label: s.ticker.clone(),
            ticker: s.ticker.clone(),
            meta: s.meta.clone(),
            lag: 0,
        })
        .collect();
    ReturnPanel::new(cal.dates()[1..].to_vec(), columns, values)
}

/// Appends lagged copies of every column for lags `1..=max_lag`, dropping the
/// first `max_lag` rows so the panel stays rectangular. Output order is the
/// lag-0 block, then the lag-1 block, and so on.
pub fn augment_lagged(panel: &ReturnPanel, max_lag: usize) -> Result<ReturnPanel> {
    if max_lag == 0 {
        return Err(Error::InvalidParams("max_lag must be at least 1".into()));
    }
    let rows = panel.n_rows();
    if rows <= max_lag {
        return Err(Error::LagTooLarge { max_lag, rows });
    }
    if let Some(c) = panel.columns.iter().find(|c| c.lag != 0) {
        return Err(Error::InvalidParams(format!(
            "panel already contains lagged column `{}`",
            c.label
        )));
    }
    let kept = rows - max_lag;
    let mut columns = Vec::with_capacity(panel.n_cols() * (max_lag + 1));
    let mut values = Vec::with_capacity(columns.capacity());
    for lag in 0..=max_lag {
        for (col, v) in panel.columns.iter().zip(&panel.values) {
            columns.push(Column {
                label: lagged_label(&col.label, lag),
                ticker: col.ticker.clone(),
                meta: col.meta.clone(),
                lag,
            });
            let start = max_lag - lag;
            values.push(v[start..start + kept].to_vec());
        }
    }
    ReturnPanel::new(panel.dates[max_lag..].to_vec(), columns, values)
}
