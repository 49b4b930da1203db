//! End-to-end runs: prices to matrices, graphs, centralities, embeddings and
//! crisis-group flows, with every artifact recorded in a run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::discretize::{symbolize_panel, BinMode, SymbolPanel, DEFAULT_BIN_WIDTH};
use crate::embed::{classical_mds, refine, Embedding, DEFAULT_DIM, DEFAULT_REFINE_ITERS, DEFAULT_REFINE_TOL};
use crate::error::{Error, Result};
use crate::flows::{build_group_panel, flow_report, FlowReport, GroupSpec, DEFAULT_TOP_K};
use crate::infotheory::te_matrix;
use crate::io::{self, MatrixMeta};
use crate::matrix::LabeledMatrix;
use crate::netmetrics::{
    asset_graph, correlation_distance, graph_centralities, nte_distance, pearson_matrix, strength_centralities,
    AssetGraph, CentralityReport, Measure, RankedEntry, ThresholdMode,
};
use crate::panel::{augment_lagged, build_panel, Column, PriceSeries, ReturnPanel, TradingCalendar};
use crate::surrogate::{
    correlation_noise_floor, derive_seed, ete_matrix, nte_matrix, rte_matrix, NoiseFloor, NoiseGenerator,
    SurrogatePlan, DEFAULT_NOISE_SIMS, DEFAULT_RTE_SIMS,
};

pub const DEFAULT_ETE_THRESHOLDS: [f64; 5] = [0.05, 0.1, 0.2, 0.3, 0.4];
pub const DEFAULT_DISTANCE_THRESHOLD: f64 = 1.2;

const NOISE_STREAM: u64 = 0x6e6f_6973_65;
const GROUP_STREAM: u64 = 0x6772_6f75_70;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: PathBuf,
    /// Dates shared by all series are used when absent.
    pub calendar: Option<PathBuf>,
    pub bin_width: f64,
    pub bin_mode: BinMode,
    pub k: usize,
    pub l: usize,
    pub surrogates: usize,
    /// 0 skips the noise floor.
    pub noise_sims: usize,
    pub seed: u64,
    /// Thresholds for directed ETE graphs.
    pub thresholds: Vec<f64>,
    /// Thresholds for undirected correlation-distance graphs.
    pub distance_thresholds: Vec<f64>,
    pub out: PathBuf,
    pub top_k: usize,
    /// JSON list of `{name, remove, manifest}` crisis groups.
    pub groups: Option<PathBuf>,
    pub embed_dim: usize,
    pub refine_iters: usize,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifest: PathBuf::from("manifest.csv"),
            calendar: None,
            bin_width: DEFAULT_BIN_WIDTH,
            bin_mode: BinMode::Global,
            k: 1,
            l: 1,
            surrogates: DEFAULT_RTE_SIMS,
            noise_sims: DEFAULT_NOISE_SIMS,
            seed: 0,
            thresholds: DEFAULT_ETE_THRESHOLDS.to_vec(),
            distance_thresholds: vec![DEFAULT_DISTANCE_THRESHOLD],
            out: PathBuf::from("out"),
            top_k: DEFAULT_TOP_K,
            groups: None,
            embed_dim: DEFAULT_DIM,
            refine_iters: DEFAULT_REFINE_ITERS,
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            return Err(Error::ZeroWidth(self.bin_width));
        }
        if !(1..=crate::discretize::MAX_ORDER).contains(&self.k) || !(1..=crate::discretize::MAX_ORDER).contains(&self.l) {
            return Err(Error::InvalidOrder { k: self.k, l: self.l });
        }
        if self.surrogates == 0 {
            return bad("surrogates must be positive".into());
        }
        if self.top_k == 0 {
            return bad("top must be positive".into());
        }
        if self.embed_dim == 0 {
            return bad("embedding dimension must be positive".into());
        }
        if let Some(t) = self.thresholds.iter().chain(&self.distance_thresholds).find(|t| !t.is_finite()) {
            return bad(format!("threshold {t} is not finite"));
        }
        if self.seed > i64::MAX as u64 {
            return bad(format!("seed must be at most {}", i64::MAX));
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::InvalidParams(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidParams(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn rte_seed(&self) -> u64 {
        self.seed
    }

    pub fn noise_seed(&self) -> u64 {
        derive_seed(self.seed, NOISE_STREAM, 0)
    }

    pub fn group_seed(&self, group: usize) -> u64 {
        derive_seed(self.seed, GROUP_STREAM, group as u64)
    }
}

/// Price series plus the calendar they are aligned to.
pub fn load_inputs(manifest: &Path, calendar: Option<&Path>) -> Result<(Vec<PriceSeries>, TradingCalendar)> {
    let series = io::load_series(manifest)?;
    let cal = match calendar {
        Some(p) => io::read_calendar(p)?,
        None => io::common_calendar(&series)?,
    };
    Ok((series, cal))
}

/// Transfer entropy family for one lag-augmented panel.
#[derive(Debug, Clone)]
pub struct FlowMatrices {
    pub symbols: SymbolPanel,
    pub te: LabeledMatrix,
    pub rte: LabeledMatrix,
    pub ete: LabeledMatrix,
    pub nte: LabeledMatrix,
}

pub fn flow_matrices(panel: &ReturnPanel, cfg: &RunConfig, seed: u64) -> Result<FlowMatrices> {
    let symbols = symbolize_panel(panel, cfg.bin_width, cfg.bin_mode).map_err(|e| e.in_stage("discretize"))?;
    let te = te_matrix(&symbols, cfg.k, cfg.l).map_err(|e| e.in_stage("te"))?;
    let plan = SurrogatePlan::new(cfg.surrogates, seed)?;
    let rte = rte_matrix(&symbols, cfg.k, cfg.l, &plan).map_err(|e| e.in_stage("rte"))?;
    let ete = ete_matrix(&te, &rte).map_err(|e| e.in_stage("ete"))?;
    let nte = nte_matrix(&ete, &symbols).map_err(|e| e.in_stage("nte"))?;
    Ok(FlowMatrices { symbols, te, rte, ete, nte })
}

/// Graph centralities with the default measures for the graph's direction.
/// An eigenvector centrality that fails to converge is dropped with a
/// warning instead of failing the report.
pub fn graph_report(graph: &AssetGraph, top_k: usize) -> Result<CentralityReport> {
    let measures = Measure::graph_defaults(graph.directed);
    match graph_centralities(graph, &measures, top_k) {
        Err(Error::NonConvergence { steps }) => {
            log::warn!("eigenvector centrality did not converge in {steps} steps; skipping it");
            let rest: Vec<Measure> = measures
                .into_iter()
                .filter(|m| !matches!(m, Measure::Ec | Measure::EcIn | Measure::EcOut))
                .collect();
            graph_centralities(graph, &rest, top_k)
        }
        other => other,
    }
}

pub const CENTRALITY_HEADER: [&str; 7] = ["measure", "rank", "label", "country", "industry", "sub_industry", "value"];
pub const FLOW_HEADER: [&str; 5] = ["label", "country", "industry", "sub_industry", "score"];

fn ranked_row(measure: &str, e: &RankedEntry) -> Vec<String> {
    vec![
        measure.to_string(),
        e.rank.to_string(),
        e.label.clone(),
        e.meta.country.clone(),
        e.meta.industry.clone(),
        e.meta.sub_industry.clone(),
        e.value.to_string(),
    ]
}

/// Top-K rows of every measure in `report`.
pub fn centrality_csv(report: &CentralityReport) -> Result<String> {
    let rows = report
        .values
        .keys()
        .flat_map(|&m| report.top(m).into_iter().map(move |e| ranked_row(m.name(), &e)));
    io::table_csv(&CENTRALITY_HEADER, rows.collect::<Vec<_>>())
}

pub fn flow_csv(entries: &[RankedEntry]) -> Result<String> {
    io::table_csv(
        &FLOW_HEADER,
        entries.iter().map(|e| {
            vec![
                e.label.clone(),
                e.meta.country.clone(),
                e.meta.industry.clone(),
                e.meta.sub_industry.clone(),
                e.value.to_string(),
            ]
        }),
    )
}

pub fn embedding_csv(embedding: &Embedding, columns: &[Column]) -> Result<String> {
    let axes: Vec<String> = (0..embedding.dim())
        .map(|a| match a {
            0 => "x".to_string(),
            1 => "y".to_string(),
            2 => "z".to_string(),
            _ => format!("d{}", a + 1),
        })
        .collect();
    let mut header: Vec<&str> = vec!["label"];
    header.extend(axes.iter().map(String::as_str));
    header.extend(["country", "industry", "sub_industry"]);
    let rows = embedding.labels.iter().zip(&embedding.coords).map(|(label, c)| {
        let meta = columns.iter().find(|col| &col.label == label).map(|col| col.meta.clone()).unwrap_or_default();
        let mut row = vec![label.clone()];
        row.extend(c.iter().map(f64::to_string));
        row.extend([meta.country, meta.industry, meta.sub_industry]);
        row
    });
    io::table_csv(&header, rows)
}

/// One written file and the parameters that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub stage: String,
    pub params: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: RunConfig,
    pub seeds: BTreeMap<String, u64>,
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
struct GroupFileEntry {
    name: String,
    #[serde(default)]
    remove: Vec<String>,
    manifest: PathBuf,
}

pub fn read_groups(path: &Path) -> Result<Vec<GroupSpec>> {
    let entries: Vec<GroupFileEntry> = io::read_json(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    entries
        .into_iter()
        .map(|e| {
            Ok(GroupSpec {
                name: e.name,
                remove_labels: e.remove,
                add_series: io::load_series(&base.join(e.manifest))?,
            })
        })
        .collect()
}

struct Writer<'a> {
    out: &'a Path,
    artifacts: Vec<Artifact>,
}

impl Writer<'_> {
    fn record(&mut self, path: &Path, stage: &str, params: &[(&str, String)]) {
        let rel = path.strip_prefix(self.out).unwrap_or(path);
        self.artifacts.push(Artifact {
            path: rel.to_string_lossy().replace('\\', "/"),
            stage: stage.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        });
    }

    fn text(&mut self, rel: &str, text: &str, stage: &str, params: &[(&str, String)]) -> Result<()> {
        let path = self.out.join(rel);
        io::write_text(&path, text)?;
        self.record(&path, stage, params);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T, stage: &str, params: &[(&str, String)]) -> Result<()> {
        let path = self.out.join(rel);
        io::write_json(&path, value)?;
        self.record(&path, stage, params);
        Ok(())
    }

    fn matrix(&mut self, rel: &str, m: &LabeledMatrix, meta: &MatrixMeta) -> Result<()> {
        let path = self.out.join(rel);
        io::write_matrix(m, meta, &path)?;
        let mut params = vec![("kind", m.kind().to_string())];
        if let Some(k) = meta.k {
            params.push(("k", k.to_string()));
        }
        if let Some(l) = meta.l {
            params.push(("l", l.to_string()));
        }
        if let Some(s) = meta.surrogates {
            params.push(("surrogates", s.to_string()));
        }
        if let Some(s) = meta.seed {
            params.push(("seed", s.to_string()));
        }
        for (k, v) in &meta.extra {
            params.push((k.as_str(), v.clone()));
        }
        self.record(&path, "matrices", &params);
        Ok(())
    }
}

fn flow_meta(m: &LabeledMatrix, cfg: &RunConfig, symbols: &SymbolPanel, seed: Option<u64>) -> MatrixMeta {
    let mut meta = MatrixMeta::new(m);
    meta.binning = symbols.global_spec();
    meta.k = Some(cfg.k);
    meta.l = Some(cfg.l);
    meta.extra.insert("bin_width".into(), cfg.bin_width.to_string());
    meta.extra.insert("bin_mode".into(), cfg.bin_mode.to_string());
    if let Some(seed) = seed {
        meta.surrogates = Some(cfg.surrogates);
        meta.seed = Some(seed);
    }
    meta
}

fn threshold_name(t: f64) -> String {
    t.to_string()
}

fn write_embedding(w: &mut Writer<'_>, name: &str, dist: &LabeledMatrix, cfg: &RunConfig, columns: &[Column]) -> Result<()> {
    if dist.n() < cfg.embed_dim + 1 {
        log::warn!("{name}: too few nodes to embed in {} dimensions", cfg.embed_dim);
        return Ok(());
    }
    let start = classical_mds(dist, cfg.embed_dim).map_err(|e| e.in_stage("embed"))?;
    let refined = refine(&start, dist, cfg.refine_iters, DEFAULT_REFINE_TOL)?;
    let params = [
        ("source", name.to_string()),
        ("dim", cfg.embed_dim.to_string()),
        ("classical_stress", start.stress.to_string()),
        ("stress", refined.stress.to_string()),
    ];
    w.text(&format!("embedding/{name}.csv"), &embedding_csv(&refined, columns)?, "embed", &params)?;
    w.json(&format!("embedding/{name}.json"), &refined, "embed", &params)
}

fn write_graphs(
    w: &mut Writer<'_>,
    name: &str,
    matrix: &LabeledMatrix,
    thresholds: &[f64],
    columns: &[Column],
    top_k: usize,
) -> Result<()> {
    let mode = ThresholdMode::default_for(matrix.kind());
    for &t in thresholds {
        let mut g = asset_graph(matrix, t, mode).map_err(|e| e.in_stage("graph"))?;
        g.attach_metadata(columns);
        let stem = format!("{name}_{}", threshold_name(t));
        let params = [
            ("source", name.to_string()),
            ("threshold", t.to_string()),
            ("directed", g.directed.to_string()),
            ("edges", g.n_edges().to_string()),
        ];
        w.text(&format!("graphs/{stem}.dot"), &g.to_dot(), "graph", &params)?;
        w.text(&format!("graphs/{stem}.csv"), &g.edges_csv()?, "graph", &params)?;
        let report = if g.n_nodes() == 0 {
            CentralityReport { nodes: Vec::new(), values: BTreeMap::new(), top_k }
        } else {
            graph_report(&g, top_k).map_err(|e| e.in_stage("centrality"))?
        };
        w.text(&format!("centrality/{stem}.csv"), &centrality_csv(&report)?, "centrality", &params)?;
        w.json(&format!("centrality/{stem}.json"), &report, "centrality", &params)?;
    }
    Ok(())
}

fn write_strength(w: &mut Writer<'_>, name: &str, matrix: &LabeledMatrix, columns: &[Column], top_k: usize) -> Result<()> {
    let mut report = strength_centralities(matrix, &Measure::strength_defaults(matrix.kind()), top_k)
        .map_err(|e| e.in_stage("centrality"))?;
    report.attach_metadata(columns);
    let params = [("source", name.to_string())];
    w.text(&format!("centrality/strength_{name}.csv"), &centrality_csv(&report)?, "centrality", &params)?;
    w.json(&format!("centrality/strength_{name}.json"), &report, "centrality", &params)
}

fn write_flows(w: &mut Writer<'_>, report: &FlowReport, params: &[(&str, String)]) -> Result<()> {
    let name = &report.group;
    w.text(&format!("flows/{name}_receivers.csv"), &flow_csv(&report.top_receivers())?, "flows", params)?;
    w.text(&format!("flows/{name}_senders.csv"), &flow_csv(&report.top_senders())?, "flows", params)?;
    w.json(&format!("flows/{name}.json"), report, "flows", params)
}

/// Runs every stage and writes all artifacts under `cfg.out`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let out = cfg.out.as_path();
    io::ensure_dir(out)?;
    let mut w = Writer { out, artifacts: Vec::new() };
    let mut seeds = BTreeMap::new();

    let (series, cal) = load_inputs(&cfg.manifest, cfg.calendar.as_deref()).map_err(|e| e.in_stage("load"))?;
    let base = build_panel(&series, &cal).map_err(|e| e.in_stage("panel"))?;
    let panel = augment_lagged(&base, 1).map_err(|e| e.in_stage("panel"))?;
    let columns = panel.columns().to_vec();
    log::info!("panel: {} rows x {} columns", panel.n_rows(), panel.n_cols());
    let panel_path = out.join("panel.csv");
    io::write_panel(&panel, &panel_path)?;
    w.record(&panel_path, "panel", &[("max_lag", "1".into()), ("rows", panel.n_rows().to_string())]);

    let corr = pearson_matrix(&panel).map_err(|e| e.in_stage("correlation"))?;
    let dist = correlation_distance(&corr)?;
    w.matrix("matrices/correlation.csv", &corr, &MatrixMeta::new(&corr))?;
    w.matrix("matrices/distance.csv", &dist, &MatrixMeta::new(&dist))?;

    log::info!("transfer entropy with {} surrogates", cfg.surrogates);
    seeds.insert("rte".to_string(), cfg.rte_seed());
    let f = flow_matrices(&panel, cfg, cfg.rte_seed())?;
    let nte_dist = nte_distance(&f.nte)?;
    w.matrix("matrices/te.csv", &f.te, &flow_meta(&f.te, cfg, &f.symbols, None))?;
    w.matrix("matrices/rte.csv", &f.rte, &flow_meta(&f.rte, cfg, &f.symbols, Some(cfg.rte_seed())))?;
    w.matrix("matrices/ete.csv", &f.ete, &flow_meta(&f.ete, cfg, &f.symbols, Some(cfg.rte_seed())))?;
    w.matrix("matrices/nte.csv", &f.nte, &flow_meta(&f.nte, cfg, &f.symbols, Some(cfg.rte_seed())))?;
    w.matrix("matrices/nte_distance.csv", &nte_dist, &flow_meta(&nte_dist, cfg, &f.symbols, Some(cfg.rte_seed())))?;

    write_graphs(&mut w, "distance", &dist, &cfg.distance_thresholds, &columns, cfg.top_k)?;
    write_graphs(&mut w, "ete", &f.ete, &cfg.thresholds, &columns, cfg.top_k)?;
    write_strength(&mut w, "correlation", &corr, &columns, cfg.top_k)?;
    write_strength(&mut w, "ete", &f.ete, &columns, cfg.top_k)?;

    write_embedding(&mut w, "distance", &dist, cfg, &columns)?;
    write_embedding(&mut w, "nte_distance", &nte_dist, cfg, &columns)?;

    if cfg.noise_sims > 0 {
        log::info!("noise floor over {} shuffles", cfg.noise_sims);
        seeds.insert("noise_floor".to_string(), cfg.noise_seed());
        let plan = SurrogatePlan::new(cfg.noise_sims, cfg.noise_seed())?;
        let nf = correlation_noise_floor(NoiseGenerator::PermutePanel(&panel), &plan).map_err(|e| e.in_stage("noise-floor"))?;
        w.json(
            "noise_floor.json",
            &nf,
            "noise-floor",
            &[("generator", nf.generator.clone()), ("sims", cfg.noise_sims.to_string()), ("seed", cfg.noise_seed().to_string())],
        )?;
    }

    if let Some(groups_path) = &cfg.groups {
        let groups = read_groups(groups_path).map_err(|e| e.in_stage("flows"))?;
        for (gi, group) in groups.iter().enumerate() {
            let seed = cfg.group_seed(gi);
            seeds.insert(format!("group:{}", group.name), seed);
            let report = crisis_analysis(&series, group, &cal, cfg, seed)?;
            write_flows(
                &mut w,
                &report.0,
                &[
                    ("group", group.name.clone()),
                    ("seed", seed.to_string()),
                    ("surrogates", cfg.surrogates.to_string()),
                    ("top_k", cfg.top_k.to_string()),
                ],
            )?;
            w.matrix(&format!("flows/{}_ete.csv", group.name), &report.1, &MatrixMeta {
                seed: Some(seed),
                surrogates: Some(cfg.surrogates),
                k: Some(cfg.k),
                l: Some(cfg.l),
                ..MatrixMeta::new(&report.1)
            })?;
        }
    }

    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        seeds,
        artifacts: w.artifacts,
    };
    io::write_json(&out.join("run.json"), &manifest)?;
    Ok(manifest)
}

/// Builds the group panel, its ETE matrix and the flow rankings.
pub fn crisis_analysis(
    base: &[PriceSeries],
    group: &GroupSpec,
    cal: &TradingCalendar,
    cfg: &RunConfig,
    seed: u64,
) -> Result<(FlowReport, LabeledMatrix)> {
    let panel = build_group_panel(base, group, cal).map_err(|e| e.in_stage("flows"))?;
    let f = flow_matrices(&panel, cfg, seed)?;
    let mut report = flow_report(&group.name, &f.ete, &group.member_labels(), cfg.top_k).map_err(|e| e.in_stage("flows"))?;
    report.attach_metadata(panel.columns());
    Ok((report, f.ete))
}

/// Noise floor with a config's seed lineage.
pub fn noise_floor(panel: &ReturnPanel, cfg: &RunConfig) -> Result<NoiseFloor> {
    let plan = SurrogatePlan::new(cfg.noise_sims.max(1), cfg.noise_seed())?;
    correlation_noise_floor(NoiseGenerator::PermutePanel(panel), &plan)
}

fn push_table(text: &mut String, title: &str, header: &[&str], rows: &[Vec<String>]) {
    let _ = writeln!(text, "== {title}");
    if rows.is_empty() {
        let _ = writeln!(text, "(empty)\n");
        return;
    }
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let _ = writeln!(text, "{}", line(header.to_vec()));
    for r in rows {
        let _ = writeln!(text, "{}", line(r.iter().map(String::as_str).collect()));
    }
    text.push('\n');
}

/// Human-readable top-K tables from a finished run directory, also written
/// as `report/*.csv`. Returns the text.
pub fn build_report(run_dir: &Path, top_k: usize) -> Result<String> {
    let centrality_dir = run_dir.join("centrality");
    if !centrality_dir.is_dir() {
        return Err(Error::MissingArtifact(centrality_dir));
    }
    let mut text = String::new();
    let mut files: Vec<PathBuf> = fs::read_dir(&centrality_dir)
        .map_err(|e| Error::io(&centrality_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let report_dir = run_dir.join("report");
    for path in files {
        let mut report: CentralityReport = io::read_json(&path)?;
        report.top_k = top_k;
        let stem = path.file_stem().unwrap_or_default().to_string_lossy().to_string();
        let mut all_rows = Vec::new();
        for &m in report.values.keys() {
            let rows: Vec<Vec<String>> = report.top(m).iter().map(|e| ranked_row(m.name(), e)[1..].to_vec()).collect();
            push_table(&mut text, &format!("{stem} {m}"), &CENTRALITY_HEADER[1..], &rows);
            all_rows.extend(report.top(m).iter().map(|e| ranked_row(m.name(), e)));
        }
        if report.values.is_empty() {
            push_table(&mut text, &stem, &CENTRALITY_HEADER[1..], &[]);
        }
        io::write_text(&report_dir.join(format!("{stem}.csv")), &io::table_csv(&CENTRALITY_HEADER, all_rows)?)?;
    }
    let flows_dir = run_dir.join("flows");
    if flows_dir.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(&flows_dir)
            .map_err(|e| Error::io(&flows_dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json") && !p.to_string_lossy().ends_with("_ete.json"))
            .collect();
        files.sort();
        for path in files {
            let mut report: FlowReport = io::read_json(&path)?;
            report.top_k = top_k;
            for (what, entries) in [("receivers", report.top_receivers()), ("senders", report.top_senders())] {
                let rows: Vec<Vec<String>> = entries
                    .iter()
                    .map(|e| {
                        vec![
                            e.label.clone(),
                            e.meta.country.clone(),
                            e.meta.industry.clone(),
                            e.meta.sub_industry.clone(),
                            e.value.to_string(),
                        ]
                    })
                    .collect();
                push_table(&mut text, &format!("{} {what}", report.group), &FLOW_HEADER, &rows);
                io::write_text(&report_dir.join(format!("flows_{}_{what}.csv", report.group)), &flow_csv(&entries)?)?;
            }
        }
    }
    Ok(text)
}
