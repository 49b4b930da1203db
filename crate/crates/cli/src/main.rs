use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use infoflow::discretize::BinMode;
use infoflow::embed::{classical_mds, refine, DEFAULT_REFINE_TOL};
use infoflow::io::{self, MatrixMeta};
use infoflow::matrix::MatrixKind;
use infoflow::netmetrics::{asset_graph, nte_distance, strength_centralities, Measure, ThresholdMode};
use infoflow::panel::{augment_lagged, build_panel};
use infoflow::pipeline::{self, RunConfig};
use infoflow::surrogate::{correlation_noise_floor, NoiseGenerator, SurrogatePlan};
use infoflow::synth::{self, SynthKind, SynthSpec};
use infoflow::par;

#[derive(Parser)]
#[command(name = "infoflow", version, about = "Transfer entropy and correlation networks for stock returns")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and write all artifacts.
    Pipeline(PipelineArgs),
    /// Build the lag-augmented return panel.
    Panel(PanelArgs),
    /// Transfer entropy matrix of a panel.
    Te(TeArgs),
    /// TE, randomized TE, effective and normalized TE of a panel.
    Ete(EteArgs),
    /// Thresholded asset graphs from a matrix.
    Graph(GraphArgs),
    /// Centrality rankings of a thresholded matrix.
    Centrality(CentralityArgs),
    /// 2D coordinates from a distance matrix.
    Embed(EmbedArgs),
    /// Crisis-group send/receive rankings.
    Crisis(CrisisArgs),
    /// Synthetic series with known coupling.
    Synth(SynthArgs),
    /// Minimum correlation distance under shuffled data.
    NoiseFloor(NoiseFloorArgs),
    /// Top-K tables from a finished run.
    Report(ReportArgs),
}

#[derive(Args)]
struct Inputs {
    /// CSV with columns ticker,file,country,industry,sub_industry.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Trading days, one per line (defaults to dates common to all series).
    #[arg(long)]
    calendar: Option<PathBuf>,
}

#[derive(Args)]
struct Binning {
    #[arg(long)]
    bin_width: Option<f64>,
    /// `global` or `per-series`.
    #[arg(long)]
    bin_mode: Option<BinMode>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    l: Option<usize>,
}

#[derive(Args)]
struct PipelineArgs {
    /// TOML run configuration; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    binning: Binning,
    #[arg(long)]
    surrogates: Option<usize>,
    /// Shuffles for the noise floor (0 skips it).
    #[arg(long)]
    noise_sims: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// ETE graph threshold (repeatable).
    #[arg(long = "threshold")]
    thresholds: Vec<f64>,
    /// Correlation-distance graph threshold (repeatable).
    #[arg(long = "distance-threshold")]
    distance_thresholds: Vec<f64>,
    #[arg(long)]
    top: Option<usize>,
    /// JSON list of crisis groups `{name, remove, manifest}`.
    #[arg(long)]
    groups: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct PanelArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, default_value_t = 1)]
    max_lag: usize,
    #[arg(long, default_value = "panel.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct TeArgs {
    /// Panel CSV written by `panel`.
    #[arg(long)]
    panel: PathBuf,
    #[command(flatten)]
    binning: Binning,
    #[arg(long, default_value = "te.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct EteArgs {
    #[arg(long)]
    panel: PathBuf,
    #[command(flatten)]
    binning: Binning,
    #[arg(long)]
    surrogates: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct GraphArgs {
    #[arg(long)]
    matrix: PathBuf,
    /// Repeatable; defaults to 1.2 for distances and 0.05..0.4 for flows.
    #[arg(long = "threshold")]
    thresholds: Vec<f64>,
    /// Labels and metadata for the nodes.
    #[arg(long)]
    panel: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct CentralityArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    panel: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    top: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct EmbedArgs {
    /// Distance matrix (or NTE matrix, converted first).
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    #[arg(long)]
    panel: Option<PathBuf>,
    #[arg(long, default_value = "embedding.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct CrisisArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    groups: PathBuf,
    #[command(flatten)]
    binning: Binning,
    #[arg(long)]
    surrogates: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    top: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SynthModel {
    Bsc,
    Ar1,
    Var1,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(value_enum)]
    model: SynthModel,
    /// Flip probability for `bsc`.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Number of series for `ar1`.
    #[arg(long, default_value_t = 5)]
    cols: usize,
    #[arg(long, default_value_t = 0.3)]
    phi: f64,
    /// Coupling matrix for `var1`, rows separated by `;`, e.g. "0.2,0;0.5,0.1".
    #[arg(long)]
    coupling: Option<String>,
    /// Returns per series.
    #[arg(long, default_value_t = 1000)]
    rows: usize,
    #[arg(long, default_value_t = synth::DEFAULT_SIGMA)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "synth")]
    out: PathBuf,
}

#[derive(Args)]
struct NoiseFloorArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Use iid Gaussian panels of ROWS x COLS instead of permuted data.
    #[arg(long, num_args = 2, value_names = ["ROWS", "COLS"])]
    gaussian: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1000)]
    noise_sims: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "noise_floor.json")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Output directory of a `pipeline` run.
    #[arg(long, default_value = "out")]
    run: PathBuf,
    #[arg(long, default_value_t = 5)]
    top: usize,
}

fn apply_binning(cfg: &mut RunConfig, b: &Binning) {
    if let Some(v) = b.bin_width {
        cfg.bin_width = v;
    }
    if let Some(v) = b.bin_mode {
        cfg.bin_mode = v;
    }
    if let Some(v) = b.k {
        cfg.k = v;
    }
    if let Some(v) = b.l {
        cfg.l = v;
    }
}

fn require_manifest(inputs: &Inputs) -> Result<&Path> {
    inputs.manifest.as_deref().context("--manifest is required")
}

fn columns_from(panel: Option<&Path>) -> Result<Vec<infoflow::panel::Column>> {
    Ok(match panel {
        Some(p) => io::read_panel(p)?.columns().to_vec(),
        None => Vec::new(),
    })
}

fn cmd_pipeline(args: PipelineArgs, threads: Option<usize>) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(m) = args.inputs.manifest {
        cfg.manifest = m;
    }
    if args.inputs.calendar.is_some() {
        cfg.calendar = args.inputs.calendar;
    }
    apply_binning(&mut cfg, &args.binning);
    if let Some(v) = args.surrogates {
        cfg.surrogates = v;
    }
    if let Some(v) = args.noise_sims {
        cfg.noise_sims = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if !args.thresholds.is_empty() {
        cfg.thresholds = args.thresholds;
    }
    if !args.distance_thresholds.is_empty() {
        cfg.distance_thresholds = args.distance_thresholds;
    }
    if let Some(v) = args.top {
        cfg.top_k = v;
    }
    if args.groups.is_some() {
        cfg.groups = args.groups;
    }
    if let Some(v) = args.out {
        cfg.out = v;
    }
    if threads.is_some() {
        cfg.threads = threads;
    }
    cfg.validate()?;
    if args.print_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    let manifest = pipeline::run_pipeline(&cfg)?;
    println!("wrote {} artifacts to {}", manifest.artifacts.len(), cfg.out.display());
    Ok(())
}

fn cmd_panel(args: PanelArgs) -> Result<()> {
    let (series, cal) = pipeline::load_inputs(require_manifest(&args.inputs)?, args.inputs.calendar.as_deref())?;
    let base = build_panel(&series, &cal)?;
    let panel = if args.max_lag == 0 { base } else { augment_lagged(&base, args.max_lag)? };
    io::write_panel(&panel, &args.out)?;
    println!("{} rows x {} columns -> {}", panel.n_rows(), panel.n_cols(), args.out.display());
    Ok(())
}

fn cmd_te(args: TeArgs) -> Result<()> {
    let mut cfg = RunConfig::default();
    apply_binning(&mut cfg, &args.binning);
    cfg.validate()?;
    let panel = io::read_panel(&args.panel)?;
    let symbols = infoflow::discretize::symbolize_panel(&panel, cfg.bin_width, cfg.bin_mode)?;
    let te = infoflow::infotheory::te_matrix(&symbols, cfg.k, cfg.l)?;
    let mut meta = MatrixMeta::new(&te);
    meta.binning = symbols.global_spec();
    meta.k = Some(cfg.k);
    meta.l = Some(cfg.l);
    io::write_matrix(&te, &meta, &args.out)?;
    println!("{}", args.out.display());
    Ok(())
}

fn cmd_ete(args: EteArgs) -> Result<()> {
    let mut cfg = RunConfig::default();
    apply_binning(&mut cfg, &args.binning);
    if let Some(s) = args.surrogates {
        cfg.surrogates = s;
    }
    cfg.validate()?;
    let panel = io::read_panel(&args.panel)?;
    let f = pipeline::flow_matrices(&panel, &cfg, args.seed)?;
    let nte_dist = nte_distance(&f.nte)?;
    for (name, m, seeded) in [
        ("te", &f.te, false),
        ("rte", &f.rte, true),
        ("ete", &f.ete, true),
        ("nte", &f.nte, true),
        ("nte_distance", &nte_dist, true),
    ] {
        let mut meta = MatrixMeta::new(m);
        meta.binning = f.symbols.global_spec();
        meta.k = Some(cfg.k);
        meta.l = Some(cfg.l);
        if seeded {
            meta.surrogates = Some(cfg.surrogates);
            meta.seed = Some(args.seed);
        }
        io::write_matrix(m, &meta, &args.out.join(format!("{name}.csv")))?;
    }
    println!("matrices written to {}", args.out.display());
    Ok(())
}

fn default_thresholds(kind: MatrixKind) -> Vec<f64> {
    match kind {
        MatrixKind::Distance => vec![pipeline::DEFAULT_DISTANCE_THRESHOLD],
        _ => pipeline::DEFAULT_ETE_THRESHOLDS.to_vec(),
    }
}

fn cmd_graph(args: GraphArgs) -> Result<()> {
    let m = io::read_matrix(&args.matrix, None)?;
    let columns = columns_from(args.panel.as_deref())?;
    let thresholds = if args.thresholds.is_empty() { default_thresholds(m.kind()) } else { args.thresholds };
    let stem = args.matrix.file_stem().unwrap_or_default().to_string_lossy().to_string();
    for t in thresholds {
        let mut g = asset_graph(&m, t, ThresholdMode::default_for(m.kind()))?;
        g.attach_metadata(&columns);
        io::write_text(&args.out.join(format!("{stem}_{t}.dot")), &g.to_dot())?;
        io::write_text(&args.out.join(format!("{stem}_{t}.csv")), &g.edges_csv()?)?;
        println!("threshold {t}: {} nodes, {} edges", g.n_nodes(), g.n_edges());
    }
    Ok(())
}

fn cmd_centrality(args: CentralityArgs) -> Result<()> {
    let m = io::read_matrix(&args.matrix, None)?;
    let columns = columns_from(args.panel.as_deref())?;
    let stem = args.matrix.file_stem().unwrap_or_default().to_string_lossy().to_string();
    let threshold = args.threshold.unwrap_or(default_thresholds(m.kind())[0]);
    let mut g = asset_graph(&m, threshold, ThresholdMode::default_for(m.kind()))?;
    g.attach_metadata(&columns);
    let mut report = if g.n_nodes() == 0 {
        log::warn!("no edges pass threshold {threshold}");
        infoflow::netmetrics::CentralityReport { nodes: vec![], values: Default::default(), top_k: args.top }
    } else {
        pipeline::graph_report(&g, args.top)?
    };
    let mut strength = strength_centralities(&m, &Measure::strength_defaults(m.kind()), args.top)?;
    strength.attach_metadata(&columns);
    report.top_k = args.top;
    let graph_path = args.out.join(format!("{stem}_{threshold}_centrality.csv"));
    io::write_text(&graph_path, &pipeline::centrality_csv(&report)?)?;
    io::write_json(&graph_path.with_extension("json"), &report)?;
    let strength_path = args.out.join(format!("{stem}_strength.csv"));
    io::write_text(&strength_path, &pipeline::centrality_csv(&strength)?)?;
    io::write_json(&strength_path.with_extension("json"), &strength)?;
    print!("{}", pipeline::centrality_csv(&report)?);
    Ok(())
}

fn cmd_embed(args: EmbedArgs) -> Result<()> {
    let mut m = io::read_matrix(&args.matrix, None)?;
    if m.kind() == MatrixKind::Nte {
        m = nte_distance(&m)?;
    }
    let start = classical_mds(&m, args.dim)?;
    let e = refine(&start, &m, args.max_iters, DEFAULT_REFINE_TOL)?;
    let columns = columns_from(args.panel.as_deref())?;
    io::write_text(&args.out, &pipeline::embedding_csv(&e, &columns)?)?;
    io::write_json(&args.out.with_extension("json"), &e)?;
    println!("stress {} (classical {}) -> {}", e.stress, start.stress, args.out.display());
    Ok(())
}

fn cmd_crisis(args: CrisisArgs) -> Result<()> {
    let mut cfg = RunConfig { top_k: args.top, seed: args.seed, ..RunConfig::default() };
    apply_binning(&mut cfg, &args.binning);
    if let Some(s) = args.surrogates {
        cfg.surrogates = s;
    }
    cfg.validate()?;
    let (series, cal) = pipeline::load_inputs(require_manifest(&args.inputs)?, args.inputs.calendar.as_deref())?;
    for (gi, group) in pipeline::read_groups(&args.groups)?.iter().enumerate() {
        let (report, ete) = pipeline::crisis_analysis(&series, group, &cal, &cfg, cfg.group_seed(gi))?;
        let name = &report.group;
        io::write_text(&args.out.join(format!("{name}_receivers.csv")), &pipeline::flow_csv(&report.top_receivers())?)?;
        io::write_text(&args.out.join(format!("{name}_senders.csv")), &pipeline::flow_csv(&report.top_senders())?)?;
        io::write_json(&args.out.join(format!("{name}.json")), &report)?;
        io::write_matrix(&ete, &MatrixMeta::new(&ete), &args.out.join(format!("{name}_ete.csv")))?;
        println!("{name}: top receiver {}", report.receivers.first().map_or("-", |e| e.label.as_str()));
    }
    Ok(())
}

fn parse_coupling(text: &str) -> Result<Vec<Vec<f64>>> {
    text.split(';')
        .map(|row| {
            row.split(',')
                .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad coupling entry `{v}`")))
                .collect()
        })
        .collect()
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let kind = match args.model {
        SynthModel::Bsc => SynthKind::Bsc { epsilon: args.epsilon },
        SynthModel::Ar1 => SynthKind::Ar1 { cols: args.cols, phi: args.phi },
        SynthModel::Var1 => SynthKind::Var1 {
            coupling: parse_coupling(args.coupling.as_deref().context("var1 needs --coupling")?)?,
        },
    };
    let data = synth::generate(&SynthSpec { kind, rows: args.rows, seed: args.seed, sigma: args.sigma })?;
    io::write_synth(&data, &args.out)?;
    println!("{} series -> {}", data.labels.len(), args.out.display());
    Ok(())
}

fn cmd_noise_floor(args: NoiseFloorArgs) -> Result<()> {
    let plan = SurrogatePlan::new(args.noise_sims, args.seed)?;
    let nf = match args.gaussian.as_deref() {
        Some([rows, cols]) => correlation_noise_floor(NoiseGenerator::Gaussian { rows: *rows, cols: *cols }, &plan)?,
        _ => {
            let (series, cal) = pipeline::load_inputs(require_manifest(&args.inputs)?, args.inputs.calendar.as_deref())?;
            let panel = augment_lagged(&build_panel(&series, &cal)?, 1)?;
            correlation_noise_floor(NoiseGenerator::PermutePanel(&panel), &plan)?
        }
    };
    io::write_json(&args.out, &nf)?;
    println!("min distance {} +/- {}", nf.min_distance_mean, nf.min_distance_std);
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    print!("{}", pipeline::build_report(&args.run, args.top)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let threads = cli.threads;
    match cli.command {
        Command::Pipeline(a) => cmd_pipeline(a, threads),
        Command::Panel(a) => cmd_panel(a),
        Command::Te(a) => cmd_te(a),
        Command::Ete(a) => cmd_ete(a),
        Command::Graph(a) => cmd_graph(a),
        Command::Centrality(a) => cmd_centrality(a),
        Command::Embed(a) => cmd_embed(a),
        Command::Crisis(a) => cmd_crisis(a),
        Command::Synth(a) => cmd_synth(a),
        Command::NoiseFloor(a) => cmd_noise_floor(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.threads {
        Some(0) => Err(anyhow::anyhow!("--threads must be positive")),
        Some(n) => par::with_threads(n, || run(cli)),
        None => run(cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
