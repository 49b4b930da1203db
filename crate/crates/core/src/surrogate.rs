//! Shuffled surrogates: randomized TE baseline, effective and normalized TE,
//! and the correlation-distance noise floor.
//!
//! Every random stream is seeded from `(master_seed, sim, column)` through a
//! SplitMix64 mix, so results do not depend on how work is scheduled.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::discretize::{SymbolPanel, SymbolSeries};
use crate::error::{Error, Result};
use crate::infotheory::{self_conditional_entropies, te_matrix};
use crate::matrix::{LabeledMatrix, MatrixKind};
use crate::netmetrics::max_offdiagonal_correlation;
use crate::panel::ReturnPanel;
use crate::par;

pub const DEFAULT_RTE_SIMS: usize = 25;
pub const DEFAULT_NOISE_SIMS: usize = 1000;

/// Destinations whose self-conditional entropy falls below this get NTE 0.
pub const NTE_MIN_DENOMINATOR: f64 = 1e-12;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based seed for stream `(a, b)` under `master`.
pub fn derive_seed(master: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ a) ^ b.wrapping_mul(GOLDEN_GAMMA))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurrogatePlan {
    pub n_sims: usize,
    pub master_seed: u64,
}

impl SurrogatePlan {
    pub fn new(n_sims: usize, master_seed: u64) -> Result<Self> {
        if n_sims == 0 {
            return Err(Error::InvalidParams("n_sims must be positive".into()));
        }
        Ok(Self {
            n_sims,
            master_seed,
        })
    }

    pub fn seed_for(&self, sim: usize, column: usize) -> u64 {
        derive_seed(self.master_seed, sim as u64, column as u64)
    }

    pub fn rng_for(&self, sim: usize, column: usize) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed_for(sim, column))
    }
}

/// Uniform random permutation (Fisher-Yates) of `x`.
pub fn shuffle_series<T: Clone>(x: &[T], seed: u64) -> Vec<T> {
    let mut out = x.to_vec();
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    out
}

/// Copy of `panel` with every column independently permuted for simulation
/// `sim`.
pub fn shuffled_panel(panel: &SymbolPanel, plan: &SurrogatePlan, sim: usize) -> SymbolPanel {
    let series = par::map_indices(panel.len(), |j| SymbolSeries {
        symbols: shuffle_series(&panel.series[j].symbols, plan.seed_for(sim, j)),
        spec: panel.series[j].spec,
    });
    SymbolPanel {
        labels: panel.labels.clone(),
        series,
    }
}

/// Mean TE matrix over `plan.n_sims` fully shuffled copies of `panel`.
pub fn rte_matrix(panel: &SymbolPanel, k: usize, l: usize, plan: &SurrogatePlan) -> Result<LabeledMatrix> {
    let mut sum = LabeledMatrix::zeros(panel.labels.clone(), MatrixKind::Rte)?;
    let mut acc = vec![0.0; sum.values().len()];
    for sim in 0..plan.n_sims {
        let te = te_matrix(&shuffled_panel(panel, plan, sim), k, l)?;
        for (a, v) in acc.iter_mut().zip(te.values()) {
            *a += v;
        }
        log::debug!("surrogate {}/{} done", sim + 1, plan.n_sims);
    }
    let n = sum.n();
    for i in 0..n {
        for j in 0..n {
            sum.set(i, j, acc[i * n + j] / plan.n_sims as f64);
        }
    }
    Ok(sum)
}

/// `ETE = TE - RTE`, entrywise. Negative entries are kept.
pub fn ete_matrix(te: &LabeledMatrix, rte: &LabeledMatrix) -> Result<LabeledMatrix> {
    te.expect_kind(&[MatrixKind::Te])?;
    rte.expect_kind(&[MatrixKind::Rte])?;
    te.expect_same_labels(rte)?;
    let values = te
        .values()
        .iter()
        .zip(rte.values())
        .map(|(a, b)| a - b)
        .collect();
    LabeledMatrix::new(te.labels().to_vec(), values, MatrixKind::Ete)
}

/// Divides each destination column of `ete` by that destination's
/// `H(X^F | X^P)`.
pub fn nte_matrix(ete: &LabeledMatrix, panel: &SymbolPanel) -> Result<LabeledMatrix> {
    ete.expect_kind(&[MatrixKind::Ete])?;
    if ete.labels() != panel.labels.as_slice() {
        return Err(Error::LabelMismatch);
    }
    let h = self_conditional_entropies(panel)?;
    let mut out = ete.clone().with_kind(MatrixKind::Nte);
    for s in 0..out.n() {
        for (d, &hd) in h.iter().enumerate() {
            let v = if hd < NTE_MIN_DENOMINATOR {
                0.0
            } else {
                ete.get(s, d) / hd
            };
            out.set(s, d, v);
        }
    }
    Ok(out)
}

pub enum NoiseGenerator<'a> {
    /// Column-wise permutations of a real panel.
    PermutePanel(&'a ReturnPanel),
    /// Independent standard normal columns.
    Gaussian { rows: usize, cols: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseFloor {
    pub min_distance_mean: f64,
    pub min_distance_std: f64,
    pub samples: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    pub n_sims: usize,
    pub master_seed: u64,
    pub generator: String,
}

/// Smallest off-diagonal correlation distance over independence panels.
pub fn correlation_noise_floor(generator: NoiseGenerator<'_>, plan: &SurrogatePlan) -> Result<NoiseFloor> {
    let (rows, cols, name) = match &generator {
        NoiseGenerator::PermutePanel(p) => (p.n_rows(), p.n_cols(), "permute-real-panel"),
        NoiseGenerator::Gaussian { rows, cols } => (*rows, *cols, "gaussian"),
    };
    if rows < 30 || cols < 2 {
        return Err(Error::ShapeTooSmall(format!(
            "noise floor needs T >= 30 and N >= 2, got T={rows}, N={cols}"
        )));
    }
    let samples = (0..plan.n_sims)
        .map(|sim| {
            let columns: Vec<Vec<f64>> = match &generator {
                NoiseGenerator::PermutePanel(p) => par::map_indices(cols, |j| {
                    shuffle_series(p.column_values(j), plan.seed_for(sim, j))
                }),
                NoiseGenerator::Gaussian { .. } => par::map_indices(cols, |j| {
                    let mut rng = plan.rng_for(sim, j);
                    (0..rows).map(|_| StandardNormal.sample(&mut rng)).collect()
                }),
            };
            let c = max_offdiagonal_correlation(&columns)?;
            Ok((2.0 * (1.0 - c)).max(0.0).sqrt())
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let std = if samples.len() > 1 {
        (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(NoiseFloor {
        min_distance_mean: mean,
        min_distance_std: std,
        samples,
        rows,
        cols,
        n_sims: plan.n_sims,
        master_seed: plan.master_seed,
        generator: name.to_string(),
    })
}
