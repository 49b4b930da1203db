use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use infoflow::netmetrics::AssetGraph;
use infoflow::pipeline::graph_report;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_infoflow"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Three tickers over 80 business days with deterministic wiggles.
fn fixture(dir: &Path, manifest_header: &str) -> PathBuf {
    let dates = infoflow::synth::business_days(80);
    let mut manifest = format!("{manifest_header}\n");
    for (i, (ticker, country)) in [("AAA", "US"), ("BBB", "DE"), ("CCC", "JP")].iter().enumerate() {
        let mut csv = String::from("date,close\n");
        let mut price = 50.0 + 10.0 * i as f64;
        for (t, d) in dates.iter().enumerate() {
            let x = ((t * (i + 3) * 7919) % 101) as f64 / 101.0 - 0.5;
            price *= (0.2 * x).exp();
            csv.push_str(&format!("{d},{price}\n"));
        }
        fs::write(dir.join(format!("{ticker}.csv")), csv).unwrap();
        let row: Vec<String> = manifest_header
            .split(',')
            .map(|col| match col {
                "ticker" => ticker.to_string(),
                "file" => format!("{ticker}.csv"),
                "country" => country.to_string(),
                "industry" => "Banks".to_string(),
                _ => "Diversified Banks".to_string(),
            })
            .collect();
        manifest.push_str(&row.join(","));
        manifest.push('\n');
    }
    let path = dir.join("manifest.csv");
    fs::write(&path, manifest).unwrap();
    path
}

const FULL_HEADER: &str = "ticker,file,country,industry,sub_industry";

fn pipeline(manifest: &Path, out: &Path, seed: &str, extra: &[&str]) {
    let mut args = vec![
        "pipeline",
        "--manifest",
        s(manifest),
        "--out",
        s(out),
        "--seed",
        seed,
        "--surrogates",
        "4",
        "--noise-sims",
        "10",
    ];
    args.extend_from_slice(extra);
    ok(&args);
}

const MATRICES: [&str; 7] = ["correlation", "distance", "te", "rte", "ete", "nte", "nte_distance"];

#[test]
fn pipeline_writes_matrices_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = fixture(tmp.path(), FULL_HEADER);
    let out = tmp.path().join("out");
    pipeline(&manifest, &out, "3", &[]);
    for m in MATRICES {
        let csv = fs::read_to_string(out.join(format!("matrices/{m}.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 7, "{m}: header plus six rows");
        assert!(out.join(format!("matrices/{m}.json")).is_file());
    }
    let run: Value = serde_json::from_str(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    let artifacts = run["artifacts"].as_array().unwrap();
    for a in artifacts {
        let path = out.join(a["path"].as_str().unwrap());
        assert!(path.is_file(), "{} listed but missing", path.display());
        assert!(a["stage"].is_string());
    }
    for m in MATRICES {
        assert!(artifacts.iter().any(|a| a["path"] == format!("matrices/{m}.csv")));
    }
    assert_eq!(run["config"]["seed"], 3);
}

#[test]
fn same_seed_same_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = fixture(tmp.path(), FULL_HEADER);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    pipeline(&manifest, &a, "9", &[]);
    pipeline(&manifest, &b, "9", &[]);
    for m in MATRICES {
        let rel = format!("matrices/{m}.csv");
        assert_eq!(fs::read(a.join(&rel)).unwrap(), fs::read(b.join(&rel)).unwrap(), "{rel}");
    }
    assert_eq!(
        fs::read(a.join("noise_floor.json")).unwrap(),
        fs::read(b.join("noise_floor.json")).unwrap()
    );
}

#[test]
fn missing_manifest_column_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = fixture(tmp.path(), "ticker,file,country,sub_industry");
    let out = run(&["pipeline", "--manifest", s(&manifest), "--out", s(&tmp.path().join("out"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("industry"), "{err}");
}

#[test]
fn config_file_round_trips_and_flags_override() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = fixture(tmp.path(), FULL_HEADER);
    let printed = ok(&["pipeline", "--manifest", s(&manifest), "--seed", "12", "--print-config"]);
    let cfg_path = tmp.path().join("run.toml");
    fs::write(&cfg_path, &printed).unwrap();
    let again = ok(&["pipeline", "--config", s(&cfg_path), "--top", "2", "--print-config"]);
    assert!(again.contains("seed = 12"), "{again}");
    assert!(again.contains("top_k = 2"), "{again}");
}

fn ground_truth(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("ground_truth.json")).unwrap()).unwrap()
}

#[test]
fn synth_ground_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let perfect = tmp.path().join("perfect");
    ok(&["synth", "bsc", "--epsilon", "0", "--rows", "500", "--out", s(&perfect)]);
    assert_eq!(ground_truth(&perfect)["analytic_te"], 1.0);
    let noise = tmp.path().join("noise");
    ok(&["synth", "bsc", "--epsilon", "0.5", "--rows", "500", "--out", s(&noise)]);
    assert_eq!(ground_truth(&noise)["analytic_te"], 0.0);
    let zero = tmp.path().join("zero");
    ok(&["synth", "var1", "--coupling", "0,0,0;0,0,0;0,0,0", "--rows", "200", "--out", s(&zero)]);
    assert_eq!(ground_truth(&zero)["edges"].as_array().unwrap().len(), 0);
    assert!(zero.join("manifest.csv").is_file() && zero.join("S2.csv").is_file());

    let out = run(&["synth", "bsc", "--epsilon", "0.9", "--out", s(&tmp.path().join("bad"))]);
    assert!(!out.status.success());
}

#[test]
fn bsc_fixture_recovers_the_planted_link() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("bsc");
    ok(&["synth", "bsc", "--epsilon", "0.1", "--rows", "5000", "--seed", "4", "--out", s(&data)]);
    let panel = tmp.path().join("panel.csv");
    ok(&["panel", "--manifest", s(&data.join("manifest.csv")), "--max-lag", "0", "--out", s(&panel)]);
    let te = tmp.path().join("te.csv");
    ok(&["te", "--panel", s(&panel), "--out", s(&te)]);
    let m = infoflow::io::read_matrix(&te, None).unwrap();
    let forward = m.get_by_label("Y", "X").unwrap();
    assert!((forward - (1.0 - infoflow::synth::binary_entropy(0.1))).abs() < 0.03, "{forward}");
    assert!(m.get_by_label("X", "Y").unwrap() < 0.01);
}

fn report_rows(text: &str, title: &str) -> usize {
    let mut lines = text.lines().skip_while(|l| *l != format!("== {title}")).skip(1);
    let first = lines.next().unwrap_or_else(|| panic!("no table `{title}` in\n{text}"));
    if first == "(empty)" {
        return 0;
    }
    lines.take_while(|l| !l.is_empty()).count()
}

#[test]
fn report_handles_empty_graphs() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = fixture(tmp.path(), FULL_HEADER);
    let out = tmp.path().join("out");
    pipeline(&manifest, &out, "1", &["--distance-threshold", "0", "--threshold", "100"]);
    let text = ok(&["report", "--run", s(&out)]);
    assert_eq!(report_rows(&text, "distance_0"), 0);
    assert_eq!(report_rows(&text, "ete_100"), 0);
    assert!(out.join("report/distance_0.csv").is_file());
}

#[test]
fn report_top_k_with_ties_and_small_graphs() {
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = tmp.path().join("run");
    fs::create_dir_all(run_dir.join("centrality")).unwrap();
    let star = AssetGraph::from_edges(&["HUB", "L1", "L2", "L3", "L4"], &[(0, 1), (0, 2), (0, 3), (0, 4)], false).unwrap();
    let report = graph_report(&star, 5).unwrap();
    fs::write(run_dir.join("centrality/star.json"), serde_json::to_string(&report).unwrap()).unwrap();

    // The four leaves tie for second place, so K = 2 lists all of them.
    let text = ok(&["report", "--run", s(&run_dir), "--top", "2"]);
    assert_eq!(report_rows(&text, "star ND"), 5, "{text}");
    let text = ok(&["report", "--run", s(&run_dir), "--top", "1"]);
    assert_eq!(report_rows(&text, "star ND"), 1, "{text}");
    // Closeness is a mean distance: the hub, at distance 1 from everyone, leads.
    assert_eq!(report_rows(&text, "star CC"), 1, "{text}");
    assert!(text.contains("== star CC\nrank  label  country  industry  sub_industry  value\n1     HUB"), "{text}");
    let text = ok(&["report", "--run", s(&run_dir), "--top", "50"]);
    assert_eq!(report_rows(&text, "star BC"), 5, "{text}");
    let csv = fs::read_to_string(run_dir.join("report/star.csv")).unwrap();
    assert!(csv.starts_with("measure,rank,label,country,industry,sub_industry,value"));
}

#[test]
fn stage_commands_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = fixture(tmp.path(), FULL_HEADER);
    let dir = tmp.path();
    let panel = dir.join("panel.csv");
    ok(&["panel", "--manifest", s(&manifest), "--out", s(&panel)]);
    ok(&["ete", "--panel", s(&panel), "--surrogates", "3", "--seed", "5", "--out", s(dir)]);
    for m in ["te", "rte", "ete", "nte"] {
        assert!(dir.join(format!("{m}.csv")).is_file(), "{m}");
    }
    ok(&["graph", "--matrix", s(&dir.join("ete.csv")), "--threshold", "0.01", "--panel", s(&panel), "--out", s(dir)]);
    assert!(dir.join("ete_0.01.dot").is_file());
    ok(&["centrality", "--matrix", s(&dir.join("ete.csv")), "--threshold", "0.01", "--out", s(dir)]);
    ok(&["embed", "--matrix", s(&dir.join("nte.csv")), "--out", s(&dir.join("embedding.csv"))]);
    let embedding = fs::read_to_string(dir.join("embedding.csv")).unwrap();
    assert!(embedding.starts_with("label,x,y"));
    assert_eq!(embedding.lines().count(), 7);
    let nf = dir.join("nf.json");
    ok(&["noise-floor", "--gaussian", "100", "20", "--noise-sims", "5", "--out", s(&nf)]);
    let v: Value = serde_json::from_str(&fs::read_to_string(nf).unwrap()).unwrap();
    assert_eq!(v["samples"].as_array().unwrap().len(), 5);
}

#[test]
fn crisis_command_ranks_receivers() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = fixture(tmp.path(), FULL_HEADER);
    let group_dir = tmp.path().join("group");
    fs::create_dir_all(&group_dir).unwrap();
    let mut csv = String::from("date,close\n");
    for (t, d) in infoflow::synth::business_days(80).iter().enumerate() {
        csv.push_str(&format!("{d},{}\n", 20.0 + ((t * 37) % 11) as f64));
    }
    fs::write(group_dir.join("GGG.csv"), csv).unwrap();
    fs::write(group_dir.join("manifest.csv"), format!("{FULL_HEADER}\nGGG,GGG.csv,DE,Banks,Diversified Banks\n")).unwrap();
    let groups = tmp.path().join("groups.json");
    fs::write(&groups, r#"[{"name": "germany", "remove": ["BBB"], "manifest": "group/manifest.csv"}]"#).unwrap();
    let out = tmp.path().join("crisis");
    let stdout = ok(&[
        "crisis", "--manifest", s(&manifest), "--groups", s(&groups), "--surrogates", "3", "--out", s(&out),
    ]);
    assert!(!stdout.is_empty());
    let receivers = fs::read_to_string(out.join("germany_receivers.csv")).unwrap();
    assert!(receivers.starts_with("label,country,industry,sub_industry,score"));
    assert_eq!(receivers.lines().count(), 3, "{receivers}");
}
