use std::collections::BTreeMap;

use chrono::{Days, NaiveDate};
use infoflow::discretize::{fit_bins, joint_counts, symbolize, BinMode, SymbolPanel, SymbolSeries};
use infoflow::embed::{classical_mds, refine_with_trace, stress};
use infoflow::flows::{emission_ranking, reception_ranking};
use infoflow::infotheory::{self_conditional_entropy, shannon_entropy, te_log_ratio, te_matrix, te_two_sum, transfer_entropy};
use infoflow::netmetrics::{
    asset_graph, correlation_distance, graph_centralities, pearson_matrix, strength_centralities, Measure, ThresholdMode,
};
use infoflow::panel::{align_to_calendar, augment_lagged, PriceSeries, SeriesMeta, TradingCalendar};
use infoflow::surrogate::{ete_matrix, nte_matrix, rte_matrix, shuffle_series, SurrogatePlan};
use infoflow::{LabeledMatrix, MatrixKind, ReturnPanel};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn symbols(alphabet: u32, len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(1..=alphabet, len)
}

fn pair(alphabet: u32) -> impl Strategy<Value = (Vec<u32>, Vec<u32>)> {
    (8usize..120).prop_flat_map(move |n| (symbols(alphabet, n..n + 1), symbols(alphabet, n..n + 1)))
}

fn symbol_panel(cols: usize) -> impl Strategy<Value = SymbolPanel> {
    (10usize..80, 2u32..5).prop_flat_map(move |(rows, alphabet)| {
        prop::collection::vec(symbols(alphabet, rows..rows + 1), cols).prop_map(|series| {
            let labels = (0..series.len()).map(|i| format!("S{i}")).collect();
            SymbolPanel::new(labels, series.into_iter().map(SymbolSeries::from_symbols).collect()).unwrap()
        })
    })
}

fn return_columns(cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (6usize..60).prop_flat_map(move |rows| prop::collection::vec(prop::collection::vec(-0.3f64..0.3, rows), cols))
}

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("S{i}")).collect()
}

fn day(i: u64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2010, 1, 1).unwrap() + Days::new(i)
}

fn square(n: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(lo..hi, n), n)
}

fn symmetric_distance(rows: &[Vec<f64>]) -> LabeledMatrix {
    let n = rows.len();
    let sym: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| match i.cmp(&j) {
                    std::cmp::Ordering::Less => rows[i][j],
                    std::cmp::Ordering::Greater => rows[j][i],
                    std::cmp::Ordering::Equal => 0.0,
                })
                .collect()
        })
        .collect();
    LabeledMatrix::from_rows(labels(n), &sym, MatrixKind::Distance).unwrap()
}

fn ete_from(rows: &[Vec<f64>], names: &[&str]) -> LabeledMatrix {
    let names = names.iter().map(|s| s.to_string()).collect();
    LabeledMatrix::from_rows(names, rows, MatrixKind::Ete).unwrap()
}

const FLOW_LABELS: [&str; 8] = ["A", "B", "G1", "G2", "A*", "B*", "G1*", "G2*"];

fn group() -> Vec<String> {
    vec!["G1".into(), "G2".into()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_fill_is_idempotent(closes in prop::collection::vec(1.0f64..200.0, 3..30), skip in prop::collection::vec(any::<bool>(), 60)) {
        let dates: Vec<NaiveDate> = (0..closes.len() as u64).map(|i| day(2 * i)).collect();
        let series = PriceSeries::new("X", SeriesMeta::default(), dates.clone(), closes).unwrap();
        let cal_dates: Vec<NaiveDate> = (0..2 * dates.len() as u64)
            .filter(|&i| i == 0 || !skip[i as usize % skip.len()])
            .map(day)
            .collect();
        let cal = TradingCalendar::new(cal_dates).unwrap();
        let once = align_to_calendar(&series, &cal).unwrap();
        let twice = align_to_calendar(&once, &cal).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn lagged_columns_shift_and_stay_finite(cols in return_columns(3), max_lag in 1usize..3) {
        prop_assume!(cols[0].len() > max_lag + 1);
        let base = ReturnPanel::from_columns(&["A", "B", "C"], cols.clone()).unwrap();
        let aug = augment_lagged(&base, max_lag).unwrap();
        prop_assert_eq!(aug.n_rows(), base.n_rows() - max_lag);
        for (j, name) in ["A", "B", "C"].iter().enumerate() {
            for lag in 0..=max_lag {
                let label = format!("{name}{}", "*".repeat(lag));
                let c = aug.index_of(&label).unwrap();
                for (t, &v) in aug.column_values(c).iter().enumerate() {
                    prop_assert_eq!(v, cols[j][t + max_lag - lag]);
                }
            }
        }
        prop_assert!(aug.values().iter().flatten().all(|v| v.is_finite()));
    }

    #[test]
    fn binning_covers_data(data in prop::collection::vec(-3.0f64..3.0, 1..200), width in prop::sample::select(vec![0.02, 0.1, 0.25])) {
        let spec = fit_bins(&[&data], width, BinMode::Global).unwrap();
        let min = data.iter().copied().fold(f64::INFINITY, f64::min);
        let max = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(spec.lo <= min && spec.hi >= max);
        prop_assert!(spec.lo + spec.n_bins as f64 * spec.width >= spec.hi - 1e-9);
        let sym = symbolize(&data, &spec).unwrap();
        prop_assert!(sym.symbols.iter().all(|&s| (1..=spec.n_bins).contains(&s)));
    }

    #[test]
    fn shuffling_commutes_with_symbolizing(data in prop::collection::vec(-1.0f64..1.0, 2..150), seed in any::<u64>()) {
        let spec = fit_bins(&[&data], 0.1, BinMode::PerSeries).unwrap();
        let a = symbolize(&shuffle_series(&data, seed), &spec).unwrap().symbols;
        let b = shuffle_series(&symbolize(&data, &spec).unwrap().symbols, seed);
        prop_assert_eq!(&a, &b);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        let mut original = symbolize(&data, &spec).unwrap().symbols;
        original.sort_unstable();
        prop_assert_eq!(sorted, original);
    }

    #[test]
    fn joint_count_marginals((x, y) in pair(4), k in 1usize..=3, l in 1usize..=3) {
        let (d, s) = (SymbolSeries::from_symbols(x.clone()), SymbolSeries::from_symbols(y));
        let counts = joint_counts(&d, &s, k, l).unwrap();
        let h = k.max(l);
        prop_assert_eq!(counts.table.values().sum::<u64>(), counts.total);
        prop_assert_eq!(counts.total as usize, x.len() - h);
        let mut direct: BTreeMap<(u32, Vec<u32>), u64> = BTreeMap::new();
        for n in (h - 1)..(x.len() - 1) {
            *direct.entry((x[n + 1], (0..k).map(|i| x[n - i]).collect())).or_insert(0) += 1;
        }
        prop_assert_eq!(counts.next_and_dest_past(), direct.clone());
        let mut past: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
        for ((_, p), c) in direct {
            *past.entry(p).or_insert(0) += c;
        }
        prop_assert_eq!(counts.dest_past(), past);
    }

    #[test]
    fn te_bounds_and_forms((x, y) in pair(4), k in 1usize..=2, l in 1usize..=2) {
        let (d, s) = (SymbolSeries::from_symbols(x), SymbolSeries::from_symbols(y));
        let counts = joint_counts(&d, &s, k, l).unwrap();
        let (two, ratio) = (te_two_sum(&counts), te_log_ratio(&counts));
        prop_assert!((two - ratio).abs() <= 1e-12);
        let te = transfer_entropy(&d, &s, 1, 1).unwrap();
        prop_assert!(te >= -1e-12);
        prop_assert!(te <= self_conditional_entropy(&d).unwrap() + 1e-9);
    }

    #[test]
    fn entropy_within_log_alphabet(x in symbols(6, 1..300)) {
        let distinct = x.iter().collect::<std::collections::BTreeSet<_>>().len();
        let h = shannon_entropy(&SymbolSeries::from_symbols(x)).unwrap();
        prop_assert!(h >= 0.0 && h <= (distinct as f64).log2() + 1e-12);
    }

    #[test]
    fn surrogate_identities(panel in symbol_panel(4), seed in any::<u64>()) {
        let te = te_matrix(&panel, 1, 1).unwrap();
        let plan = SurrogatePlan::new(3, seed).unwrap();
        let rte = rte_matrix(&panel, 1, 1, &plan).unwrap();
        prop_assert_eq!(&rte, &rte_matrix(&panel, 1, 1, &plan).unwrap());
        let ete = ete_matrix(&te, &rte).unwrap();
        for ((t, r), e) in te.values().iter().zip(rte.values()).zip(ete.values()) {
            prop_assert_eq!(e.to_bits(), (t - r).to_bits());
            prop_assert!((r + e - t).abs() <= f64::EPSILON * t.abs().max(r.abs()));
        }
        let nte = nte_matrix(&ete, &panel).unwrap();
        prop_assert!(nte.values().iter().all(|&v| v <= 1.0 + 1e-9));
    }

    #[test]
    fn correlation_is_psd(cols in return_columns(5)) {
        let mut cols = cols;
        for (j, c) in cols.iter_mut().enumerate() {
            let i = j % c.len();
            c[i] += 1.0;
        }
        let corr = pearson_matrix(&ReturnPanel::from_columns(&["A", "B", "C", "D", "E"], cols).unwrap()).unwrap();
        let m = DMatrix::from_row_slice(5, 5, corr.values());
        let min = SymmetricEigen::new(m).eigenvalues.min();
        prop_assert!(min >= -1e-10);
        let dist = correlation_distance(&corr).unwrap();
        prop_assert!(dist.is_symmetric(0.0) && dist.values().iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn keep_below_graphs_nest(rows in square(6, 0.0, 2.0), t1 in 0.0f64..2.0, dt in 0.0f64..1.0) {
        let dist = symmetric_distance(&rows);
        let edges = |t: f64| {
            asset_graph(&dist, t, ThresholdMode::KeepBelow).map(|g| {
                g.edges.iter().map(|e| (g.nodes[e.source].label.clone(), g.nodes[e.target].label.clone())).collect::<Vec<_>>()
            })
        };
        let small = edges(t1).unwrap_or_default();
        let large = edges(t1 + dt).unwrap_or_default();
        prop_assert!(small.iter().all(|e| large.contains(e)));
    }

    #[test]
    fn rankings_survive_scaling(rows in square(6, -0.2, 0.6), scale in 0.01f64..100.0) {
        let names = ["A", "B", "C", "D", "E", "F"];
        let m = ete_from(&rows, &names);
        let scaled = m.map(MatrixKind::Ete, |v| v * scale);
        let g = asset_graph(&m, 0.2, ThresholdMode::KeepAbove);
        let gs = asset_graph(&scaled, 0.2 * scale, ThresholdMode::KeepAbove);
        if let (Ok(g), Ok(gs)) = (g, gs) {
            let ends = |g: &infoflow::netmetrics::AssetGraph| g.edges.iter().map(|e| (e.source, e.target)).collect::<Vec<_>>();
            prop_assert_eq!(ends(&g), ends(&gs));
            let measures = [Measure::NdIn, Measure::NdOut, Measure::HcIn, Measure::HcOut, Measure::BcDir];
            let a = graph_centralities(&g, &measures, 3).unwrap();
            let b = graph_centralities(&gs, &measures, 3).unwrap();
            for m in measures {
                prop_assert_eq!(a.get(m), b.get(m));
            }
        }
        let ns = strength_centralities(&m, &[Measure::NsIn, Measure::NsOut], 3).unwrap();
        let ns_scaled = strength_centralities(&scaled, &[Measure::NsIn, Measure::NsOut], 3).unwrap();
        for measure in [Measure::NsIn, Measure::NsOut] {
            for (x, y) in ns.get(measure).unwrap().iter().zip(ns_scaled.get(measure).unwrap()) {
                prop_assert!((x * scale - y).abs() <= 1e-9 * (1.0 + y.abs()));
            }
        }
    }

    #[test]
    fn embedding_follows_label_permutation(rows in square(6, 0.2, 2.0), perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle()) {
        let dist = symmetric_distance(&rows);
        let n = dist.n();
        let permuted_rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| dist.get(perm[i], perm[j])).collect()).collect();
        let permuted_labels = perm.iter().map(|&p| dist.labels()[p].clone()).collect();
        let permuted = LabeledMatrix::from_rows(permuted_labels, &permuted_rows, MatrixKind::Distance).unwrap();
        let (a, b) = match (classical_mds(&dist, 2), classical_mds(&permuted, 2)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return Ok(()),
        };
        prop_assert!((a.stress - b.stress).abs() <= 1e-8 * (1.0 + a.stress));
        for (i, &p) in perm.iter().enumerate() {
            prop_assert_eq!(&b.labels[i], &a.labels[p]);
        }
        for i in 0..n {
            for j in 0..n {
                prop_assert!((b.distance(i, j) - a.distance(perm[i], perm[j])).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn stress_ignores_rigid_motion(rows in square(7, 0.2, 2.0), angle in 0.0f64..6.3, shift in (-5.0f64..5.0, -5.0f64..5.0), flip in any::<bool>()) {
        let dist = symmetric_distance(&rows);
        let coords: Vec<Vec<f64>> = (0..7).map(|i| vec![rows[i][0], rows[i][1]]).collect();
        let (c, s) = (angle.cos(), angle.sin());
        let moved: Vec<Vec<f64>> = coords
            .iter()
            .map(|p| {
                let y = if flip { -p[1] } else { p[1] };
                vec![c * p[0] - s * y + shift.0, s * p[0] + c * y + shift.1]
            })
            .collect();
        let (a, b) = (stress(&coords, &dist).unwrap(), stress(&moved, &dist).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
    }

    #[test]
    fn refinement_never_raises_stress(rows in square(6, 0.2, 2.0)) {
        let dist = symmetric_distance(&rows);
        if let Ok(start) = classical_mds(&dist, 2) {
            let (out, trace) = refine_with_trace(&start, &dist, 200, 1e-12).unwrap();
            prop_assert!(trace.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(out.stress <= start.stress);
        }
    }

    #[test]
    fn flow_sums_match_submatrix(rows in square(8, -0.3, 0.8), scale in 0.01f64..50.0) {
        let m = ete_from(&rows, &FLOW_LABELS);
        let receivers = reception_ranking(&m, &group()).unwrap();
        let senders = emission_ranking(&m, &group()).unwrap();
        let total: f64 = [6, 7].iter().flat_map(|&s| [0, 1].map(|d| rows[s][d])).sum();
        let r_sum: f64 = receivers.iter().map(|e| e.score).sum();
        let s_sum: f64 = senders.iter().map(|e| e.score).sum();
        prop_assert!((r_sum - total).abs() <= 1e-12 && (s_sum - total).abs() <= 1e-12);
        prop_assert!(receivers.windows(2).all(|w| w[0].score >= w[1].score));

        let scaled = m.map(MatrixKind::Ete, |v| v * scale);
        let order = |v: Vec<infoflow::flows::FlowEntry>| v.into_iter().map(|e| e.label).collect::<Vec<_>>();
        let distinct = receivers.windows(2).all(|w| w[0].score != w[1].score);
        if distinct {
            prop_assert_eq!(order(receivers.clone()), order(reception_ranking(&scaled, &group()).unwrap()));
        }

        // Relabel every ticker; scores follow their columns.
        let renamed: Vec<&str> = vec!["P", "Q", "H1", "H2", "P*", "Q*", "H1*", "H2*"];
        let relabeled = ete_from(&rows, &renamed);
        let moved = reception_ranking(&relabeled, &["H1".to_string(), "H2".to_string()]).unwrap();
        for e in &receivers {
            let new = if e.label == "A" { "P" } else { "Q" };
            prop_assert_eq!(moved.iter().find(|m| m.label == new).unwrap().score, e.score);
        }
    }
}

#[test]
fn constant_group_sends_nothing() {
    let rows = 200;
    let wave = |p: usize| (0..rows).map(move |t| if (t / p) % 2 == 0 { 0.05 } else { -0.05 }).collect::<Vec<f64>>();
    let base = ReturnPanel::from_columns(
        &["A", "B", "G1", "G2"],
        vec![wave(3), wave(5), vec![0.0; rows], vec![0.0; rows]],
    )
    .unwrap();
    let panel = augment_lagged(&base, 1).unwrap();
    let sym = infoflow::discretize::symbolize_panel(&panel, 0.1, BinMode::Global).unwrap();
    let te = te_matrix(&sym, 1, 1).unwrap();
    let rte = rte_matrix(&sym, 1, 1, &SurrogatePlan::new(5, 3).unwrap()).unwrap();
    let ete = ete_matrix(&te, &rte).unwrap();
    let senders = emission_ranking(&ete, &group()).unwrap();
    assert_eq!(senders.len(), 2);
    assert!(senders.iter().all(|e| e.score == 0.0), "{senders:?}");
}

/// The lower end of NTE is not bounded by -1: on a short series whose own
/// history already pins it down, shuffling inflates the surrogate TE past
/// `H(X^F|X^P)`.
#[test]
fn nte_can_fall_below_minus_one() {
    let d = SymbolSeries::from_symbols(vec![3, 2, 1, 2, 1, 2, 1, 3, 2, 1]);
    let s = SymbolSeries::from_symbols(vec![3, 2, 3, 1, 1, 3, 1, 2, 1, 2]);
    let panel = SymbolPanel::new(vec!["S".into(), "D".into()], vec![s, d]).unwrap();
    let te = te_matrix(&panel, 1, 1).unwrap();
    let rte = rte_matrix(&panel, 1, 1, &SurrogatePlan::new(25, 7).unwrap()).unwrap();
    let nte = nte_matrix(&ete_matrix(&te, &rte).unwrap(), &panel).unwrap();
    assert!(rte.get(0, 1) > te.get(0, 1));
    assert!(nte.get(0, 1) < -1.0, "{}", nte.get(0, 1));
}
