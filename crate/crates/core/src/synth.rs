//! Synthetic panels with known coupling, for validating the estimators.

use chrono::{Datelike, Days, NaiveDate, Weekday};
use nalgebra::{DMatrix, Schur};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{PriceSeries, SeriesMeta, TradingCalendar};

/// Size of the two return levels used for binary channel series. With the
/// default 0.1 bin width they fall in two distinct bins.
pub const BSC_RETURN: f64 = 0.05;
pub const DEFAULT_SIGMA: f64 = 0.01;
const BURN_IN: usize = 100;
const START_PRICE: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SynthKind {
    /// `X[n+1] = Y[n]` flipped with probability `epsilon`, `Y` iid fair bits.
    Bsc { epsilon: f64 },
    /// Independent AR(1) columns.
    Ar1 { cols: usize, phi: f64 },
    /// `x[t] = A x[t-1] + noise`; `coupling[d][s]` is the effect of `s` on `d`.
    Var1 { coupling: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    #[serde(flatten)]
    pub kind: SynthKind,
    /// Number of returns per series.
    pub rows: usize,
    pub seed: u64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedEdge {
    pub source: String,
    pub target: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: SynthSpec,
    pub edges: Vec<PlantedEdge>,
    /// Analytic transfer entropy of the planted link in bits, where known.
    pub analytic_te: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub labels: Vec<String>,
    /// One return series per label.
    pub returns: Vec<Vec<f64>>,
    pub ground_truth: GroundTruth,
}

/// `H_b(p) = -p log2 p - (1-p) log2 (1-p)`.
pub fn binary_entropy(p: f64) -> f64 {
    [p, 1.0 - p]
        .into_iter()
        .filter(|&q| q > 0.0)
        .map(|q| -q * q.log2())
        .sum()
}

/// Source and destination symbols (1 or 2) of a binary symmetric channel
/// with one step of delay.
pub fn bsc_symbols(epsilon: f64, rows: usize, seed: u64) -> Result<(Vec<u32>, Vec<u32>)> {
    if !(0.0..=0.5).contains(&epsilon) {
        return Err(Error::InvalidParams(format!("epsilon must lie in [0, 0.5], got {epsilon}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<u32> = (0..rows).map(|_| rng.random_range(1..=2)).collect();
    let mut x = Vec::with_capacity(rows);
    if rows > 0 {
        x.push(rng.random_range(1..=2));
    }
    for n in 1..rows {
        let flip = rng.random_bool(epsilon);
        x.push(if flip { 3 - y[n - 1] } else { y[n - 1] });
    }
    Ok((y, x))
}

const SCHUR_MAX_ITERS: usize = 10_000;

fn spectral_radius(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let m = DMatrix::from_fn(n, n, |i, j| a[i][j]);
    if let Some(schur) = Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITERS) {
        return schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    }
    // Gelfand's formula by repeated squaring, tracking the scale in logs.
    let (mut b, mut log_scale, mut power) = (m, 0.0, 1.0);
    for _ in 0..40 {
        let norm = b.norm();
        if norm == 0.0 {
            return 0.0;
        }
        b /= norm;
        log_scale += norm.ln();
        b = &b * &b;
        log_scale *= 2.0;
        power *= 2.0;
    }
    ((log_scale + b.norm().ln()) / power).exp()
}

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("S{i}")).collect()
}

fn simulate_var(a: &[Vec<f64>], rows: usize, sigma: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut x = vec![0.0; n];
    let mut out = vec![Vec::with_capacity(rows); n];
    for t in 0..BURN_IN + rows {
        let noise: Vec<f64> = (0..n).map(|_| {
            let z: f64 = StandardNormal.sample(&mut *rng);
            sigma * z
        }).collect();
        x = (0..n)
            .map(|d| (0..n).map(|s| a[d][s] * x[s]).sum::<f64>() + noise[d])
            .collect();
        if t >= BURN_IN {
            for (col, &v) in out.iter_mut().zip(&x) {
                col.push(v);
            }
        }
    }
    out
}

pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    if spec.rows < 2 {
        return Err(Error::InvalidParams(format!("rows must be at least 2, got {}", spec.rows)));
    }
    if !(spec.sigma > 0.0 && spec.sigma.is_finite()) {
        return Err(Error::InvalidParams(format!("sigma must be positive, got {}", spec.sigma)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (labels, returns, edges, analytic_te) = match &spec.kind {
        SynthKind::Bsc { epsilon } => {
            let (y, x) = bsc_symbols(*epsilon, spec.rows, spec.seed)?;
            let to_return = |s: &u32| if *s == 1 { -BSC_RETURN } else { BSC_RETURN };
            let te = 1.0 - binary_entropy(*epsilon);
            (
                vec!["Y".to_string(), "X".to_string()],
                vec![y.iter().map(to_return).collect(), x.iter().map(to_return).collect()],
                vec![PlantedEdge { source: "Y".into(), target: "X".into(), weight: te }],
                Some(te),
            )
        }
        SynthKind::Ar1 { cols, phi } => {
            if *cols < 1 || !(phi.abs() < 1.0) {
                return Err(Error::InvalidParams(format!("ar1 needs cols >= 1 and |phi| < 1, got cols={cols}, phi={phi}")));
            }
            let a: Vec<Vec<f64>> = (0..*cols)
                .map(|i| (0..*cols).map(|j| if i == j { *phi } else { 0.0 }).collect())
                .collect();
            (labels(*cols), simulate_var(&a, spec.rows, spec.sigma, &mut rng), Vec::new(), None)
        }
        SynthKind::Var1 { coupling } => {
            let n = coupling.len();
            if n == 0 || coupling.iter().any(|r| r.len() != n) {
                return Err(Error::InvalidParams("coupling must be a non-empty square matrix".into()));
            }
            if coupling.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParams("coupling has non-finite entries".into()));
            }
            let rho = spectral_radius(coupling);
            if rho >= 1.0 {
                return Err(Error::InvalidParams(format!("coupling spectral radius {rho} is not below 1")));
            }
            let names = labels(n);
            let mut edges = Vec::new();
            for (s, source) in names.iter().enumerate() {
                for (d, target) in names.iter().enumerate() {
                    if s != d && coupling[d][s] != 0.0 {
                        edges.push(PlantedEdge {
                            source: source.clone(),
                            target: target.clone(),
                            weight: coupling[d][s],
                        });
                    }
                }
            }
            (names, simulate_var(coupling, spec.rows, spec.sigma, &mut rng), edges, None)
        }
    };
    Ok(SynthData {
        labels,
        returns,
        ground_truth: GroundTruth {
            spec: spec.clone(),
            edges,
            analytic_te,
        },
    })
}

/// Weekdays starting at 2000-01-03.
pub fn business_days(n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

impl SynthData {
    pub fn calendar(&self) -> Result<TradingCalendar> {
        TradingCalendar::new(business_days(self.ground_truth.spec.rows + 1))
    }

    /// Price series whose log-returns are the generated returns.
    pub fn price_series(&self) -> Result<Vec<PriceSeries>> {
        let dates = business_days(self.ground_truth.spec.rows + 1);
        let industry = match self.ground_truth.spec.kind {
            SynthKind::Bsc { .. } => "bsc",
            SynthKind::Ar1 { .. } => "ar1",
            SynthKind::Var1 { .. } => "var1",
        };
        self.labels
            .iter()
            .zip(&self.returns)
            .map(|(label, r)| {
                let mut closes = Vec::with_capacity(r.len() + 1);
                let mut log_p = START_PRICE.ln();
                closes.push(START_PRICE);
                for v in r {
                    log_p += v;
                    closes.push(log_p.exp());
                }
                let meta = SeriesMeta {
                    country: "SYN".into(),
                    industry: industry.into(),
                    sub_industry: industry.into(),
                };
                PriceSeries::new(label.clone(), meta, dates.clone(), closes)
            })
            .collect()
    }
}
