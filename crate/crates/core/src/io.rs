//! CSV and JSON readers and writers for prices, panels, matrices and
//! synthetic data.
//!
//! Floats are written with Rust's shortest round-trip formatting, so equal
//! values always produce identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::discretize::BinningSpec;
use crate::error::{Error, Result};
use crate::matrix::{LabeledMatrix, MatrixKind};
use crate::panel::{Column, PriceSeries, ReturnPanel, SeriesMeta, TradingCalendar};
use crate::synth::SynthData;

pub const DATE_FORMAT: &str = "%Y-%m-%d";
const MANIFEST_COLUMNS: [&str; 5] = ["ticker", "file", "country", "industry", "sub_industry"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub ticker: String,
    /// Price file, resolved against the manifest's directory.
    pub file: PathBuf,
    #[serde(flatten)]
    pub meta: SeriesMeta,
}

fn parse_date(s: &str, path: &Path, line: usize) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), DATE_FORMAT)
        .map_err(|e| Error::format(path, format!("line {line}: bad date `{s}`: {e}")))
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn header_index(headers: &csv::StringRecord, name: &str, path: &Path, what: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::format(path, format!("{what} is missing column `{name}`")))
}

/// Reads `ticker,file,country,industry,sub_industry` rows.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers()?.clone();
    let idx = MANIFEST_COLUMNS
        .iter()
        .map(|c| header_index(&headers, c, path, "manifest"))
        .collect::<Result<Vec<_>>>()?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(idx[i]).unwrap_or("").to_string();
        if field(0).is_empty() {
            return Err(Error::format(path, format!("line {}: empty ticker", line + 2)));
        }
        out.push(ManifestEntry {
            ticker: field(0),
            file: base.join(field(1)),
            meta: SeriesMeta {
                country: field(2),
                industry: field(3),
                sub_industry: field(4),
            },
        });
    }
    if out.is_empty() {
        return Err(Error::format(path, "manifest lists no tickers"));
    }
    Ok(out)
}

/// Reads a `date,close` price file.
pub fn read_prices(entry: &ManifestEntry) -> Result<PriceSeries> {
    let path = entry.file.as_path();
    let mut rdr = reader(path).map_err(|e| Error::for_series(&entry.ticker, e))?;
    let headers = rdr.headers()?.clone();
    let di = header_index(&headers, "date", path, "price file")?;
    let ci = header_index(&headers, "close", path, "price file")?;
    let (mut dates, mut closes) = (Vec::new(), Vec::new());
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        dates.push(parse_date(rec.get(di).unwrap_or(""), path, line + 2)?);
        let raw = rec.get(ci).unwrap_or("");
        let close: f64 = raw
            .parse()
            .map_err(|_| Error::format(path, format!("line {}: bad close `{raw}`", line + 2)))?;
        closes.push(close);
    }
    PriceSeries::new(entry.ticker.clone(), entry.meta.clone(), dates, closes)
}

/// One date per line, optionally under a `date` header.
pub fn read_calendar(path: &Path) -> Result<TradingCalendar> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut dates = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let first = line.split(',').next().unwrap_or("").trim();
        if first.is_empty() || (i == 0 && first.eq_ignore_ascii_case("date")) {
            continue;
        }
        dates.push(parse_date(first, path, i + 1)?);
    }
    TradingCalendar::new(dates).map_err(|e| Error::format(path, e.to_string()))
}

/// Dates on which every series has a close.
pub fn common_calendar(series: &[PriceSeries]) -> Result<TradingCalendar> {
    let mut dates: Vec<NaiveDate> = series.first().map(|s| s.dates().to_vec()).unwrap_or_default();
    for s in &series[1.min(series.len())..] {
        let own: std::collections::HashSet<&NaiveDate> = s.dates().iter().collect();
        dates.retain(|d| own.contains(d));
    }
    TradingCalendar::new(dates)
}

pub fn load_series(manifest: &Path) -> Result<Vec<PriceSeries>> {
    read_manifest(manifest)?.iter().map(read_prices).collect()
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

fn csv_string(rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidParams(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Path of the JSON sidecar next to a CSV file.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PanelSidecar {
    rows: usize,
    columns: Vec<Column>,
}

/// Writes `date,<labels...>` rows plus a sidecar describing every column.
pub fn write_panel(panel: &ReturnPanel, path: &Path) -> Result<()> {
    let header = std::iter::once("date".to_string()).chain(panel.labels());
    let body = (0..panel.n_rows()).map(|t| {
        std::iter::once(panel.dates()[t].format(DATE_FORMAT).to_string())
            .chain(panel.values().iter().map(|c| c[t].to_string()))
            .collect()
    });
    write_text(path, &csv_string(std::iter::once(header.collect()).chain(body))?)?;
    write_json(
        &sidecar_path(path),
        &PanelSidecar {
            rows: panel.n_rows(),
            columns: panel.columns().to_vec(),
        },
    )
}

pub fn read_panel(path: &Path) -> Result<ReturnPanel> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let mut rdr = reader(path)?;
    let labels: Vec<String> = rdr.headers()?.iter().skip(1).map(String::from).collect();
    let mut dates = Vec::new();
    let mut values = vec![Vec::new(); labels.len()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        dates.push(parse_date(&rec[0], path, line + 2)?);
        for (j, col) in values.iter_mut().enumerate() {
            let raw = rec.get(j + 1).unwrap_or("");
            col.push(
                raw.parse()
                    .map_err(|_| Error::format(path, format!("line {}: bad value `{raw}`", line + 2)))?,
            );
        }
    }
    let sidecar = sidecar_path(path);
    let columns = if sidecar.exists() {
        let meta: PanelSidecar = read_json(&sidecar)?;
        if meta.columns.iter().map(|c| &c.label).ne(labels.iter()) {
            return Err(Error::format(&sidecar, "columns do not match the panel header"));
        }
        meta.columns
    } else {
        labels
            .iter()
            .map(|l| {
                let (ticker, lag) = crate::panel::split_lag(l);
                Column {
                    label: l.clone(),
                    ticker: ticker.to_string(),
                    meta: SeriesMeta::default(),
                    lag,
                }
            })
            .collect()
    };
    ReturnPanel::new(dates, columns, values)
}

/// Provenance stored beside every matrix file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixMeta {
    pub kind: MatrixKind,
    pub labels: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub binning: Option<BinningSpec>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub l: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub surrogates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub extra: BTreeMap<String, String>,
}

impl MatrixMeta {
    pub fn new(matrix: &LabeledMatrix) -> Self {
        Self {
            kind: matrix.kind(),
            labels: matrix.labels().to_vec(),
            binning: None,
            k: None,
            l: None,
            surrogates: None,
            seed: None,
            extra: BTreeMap::new(),
        }
    }
}

/// Square CSV with a label header row and a label first column; `values[i][j]`
/// sits in row `i`, column `j`.
pub fn matrix_csv(matrix: &LabeledMatrix) -> Result<String> {
    let header = std::iter::once(String::new()).chain(matrix.labels().iter().cloned()).collect();
    let body = (0..matrix.n()).map(|i| {
        std::iter::once(matrix.labels()[i].clone())
            .chain(matrix.row(i).iter().map(f64::to_string))
            .collect()
    });
    csv_string(std::iter::once(header).chain(body))
}

pub fn write_matrix(matrix: &LabeledMatrix, meta: &MatrixMeta, path: &Path) -> Result<()> {
    write_text(path, &matrix_csv(matrix)?)?;
    write_json(&sidecar_path(path), meta)
}

/// Reads a matrix CSV; the kind comes from the sidecar, or `fallback` when
/// there is none.
pub fn read_matrix(path: &Path, fallback: Option<MatrixKind>) -> Result<LabeledMatrix> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let sidecar = sidecar_path(path);
    let kind = if sidecar.exists() {
        read_json::<MatrixMeta>(&sidecar)?.kind
    } else {
        fallback.ok_or_else(|| Error::MissingArtifact(sidecar.clone()))?
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let labels: Vec<String> = rdr.headers()?.iter().skip(1).map(String::from).collect();
    let mut values = Vec::with_capacity(labels.len() * labels.len());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.get(0) != labels.get(i).map(String::as_str) {
            return Err(Error::format(path, format!("row {} label does not match header", i + 1)));
        }
        for raw in rec.iter().skip(1) {
            values.push(
                raw.parse::<f64>()
                    .map_err(|_| Error::format(path, format!("row {}: bad value `{raw}`", i + 1)))?,
            );
        }
    }
    LabeledMatrix::new(labels, values, kind).map_err(|e| Error::format(path, e.to_string()))
}

/// Writes one `date,close` file per series, a manifest, a calendar and the
/// ground truth into `dir`.
pub fn write_synth(data: &SynthData, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    let series = data.price_series()?;
    let mut manifest = vec![MANIFEST_COLUMNS.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
    for s in &series {
        let file = format!("{}.csv", s.ticker);
        let rows = std::iter::once(vec!["date".to_string(), "close".to_string()]).chain(
            s.dates()
                .iter()
                .zip(s.closes())
                .map(|(d, c)| vec![d.format(DATE_FORMAT).to_string(), c.to_string()]),
        );
        write_text(&dir.join(&file), &csv_string(rows)?)?;
        manifest.push(vec![
            s.ticker.clone(),
            file,
            s.meta.country.clone(),
            s.meta.industry.clone(),
            s.meta.sub_industry.clone(),
        ]);
    }
    write_text(&dir.join("manifest.csv"), &csv_string(manifest)?)?;
    let cal = data.calendar()?;
    let rows = std::iter::once(vec!["date".to_string()])
        .chain(cal.dates().iter().map(|d| vec![d.format(DATE_FORMAT).to_string()]));
    write_text(&dir.join("calendar.csv"), &csv_string(rows)?)?;
    write_json(&dir.join("ground_truth.json"), &data.ground_truth)
}

/// Builds CSV text from a header and rows of string fields.
pub fn table_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    csv_string(std::iter::once(header.iter().map(|s| s.to_string()).collect()).chain(rows))
}
