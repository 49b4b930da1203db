//! Correlation and distance matrices, thresholded asset graphs and
//! centrality measures.

mod centrality;
mod graph;

pub(crate) use centrality::ranked_top;
pub use centrality::{
    graph_centralities, strength_centralities, top_k_indices, CentralityReport, Measure, RankedEntry,
    EC_MAX_STEPS, EC_TOLERANCE,
};
pub use graph::{asset_graph, AssetGraph, Edge, GraphNode, ThresholdMode};

use crate::error::{Error, Result};
use crate::matrix::{LabeledMatrix, MatrixKind};
use crate::panel::ReturnPanel;
use crate::par;

/// Centers and scales each column to unit Euclidean norm, so that dot
/// products of the results are Pearson correlations.
fn standardize(columns: &[Vec<f64>], labels: Option<&[String]>) -> Result<Vec<Vec<f64>>> {
    columns
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let n = c.len() as f64;
            let mean = c.iter().sum::<f64>() / n;
            let centered: Vec<f64> = c.iter().map(|x| x - mean).collect();
            let norm = centered.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(norm > 0.0) || !norm.is_finite() {
                let label = labels.map_or_else(|| format!("#{j}"), |l| l[j].clone());
                return Err(Error::ZeroVariance(label));
            }
            Ok(centered.into_iter().map(|x| x / norm).collect())
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Pearson correlation between every pair of panel columns.
pub fn pearson_matrix(panel: &ReturnPanel) -> Result<LabeledMatrix> {
    let labels = panel.labels();
    let z = standardize(panel.values(), Some(&labels))?;
    let n = z.len();
    let rows = par::map_indices(n, |i| {
        (0..n)
            .map(|j| {
                if i == j {
                    1.0
                } else {
                    // Same operand order for (i,j) and (j,i) keeps the
                    // matrix exactly symmetric.
                    let (a, b) = if i < j { (i, j) } else { (j, i) };
                    dot(&z[a], &z[b]).clamp(-1.0, 1.0)
                }
            })
            .collect::<Vec<f64>>()
    });
    LabeledMatrix::from_rows(labels, &rows, MatrixKind::Correlation)
}

/// Largest off-diagonal Pearson correlation among `columns`.
pub fn max_offdiagonal_correlation(columns: &[Vec<f64>]) -> Result<f64> {
    if columns.len() < 2 {
        return Err(Error::ShapeTooSmall("need at least two columns".into()));
    }
    let z = standardize(columns, None)?;
    let n = z.len();
    let row_max = par::map_indices(n, |i| {
        ((i + 1)..n)
            .map(|j| dot(&z[i], &z[j]))
            .fold(f64::NEG_INFINITY, f64::max)
    });
    Ok(row_max
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
        .clamp(-1.0, 1.0))
}

fn distance_from_similarity(c: f64) -> f64 {
    (2.0 * (1.0 - c)).max(0.0).sqrt()
}

/// `d = sqrt(2 (1 - c))` with a zero diagonal.
pub fn correlation_distance(corr: &LabeledMatrix) -> Result<LabeledMatrix> {
    corr.expect_kind(&[MatrixKind::Correlation])?;
    let mut d = corr.map(MatrixKind::Distance, distance_from_similarity);
    for i in 0..d.n() {
        d.set(i, i, 0.0);
    }
    Ok(d)
}

/// Distance from normalized transfer entropy: the correlation distance
/// formula applied to NTE, zero diagonal, and the smaller of `d_ij`, `d_ji`
/// kept for both entries.
pub fn nte_distance(nte: &LabeledMatrix) -> Result<LabeledMatrix> {
    nte.expect_kind(&[MatrixKind::Nte])?;
    let raw = nte.map(MatrixKind::Distance, distance_from_similarity);
    let mut d = raw.clone();
    let n = d.n();
    for i in 0..n {
        d.set(i, i, 0.0);
        for j in (i + 1)..n {
            let v = raw.get(i, j).min(raw.get(j, i));
            d.set(i, j, v);
            d.set(j, i, v);
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("L{i}")).collect()
    }

    #[test]
    fn pearson_edge_cases() {
        let x = vec![0.1, -0.2, 0.05, 0.3, -0.1];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let p = ReturnPanel::from_columns(&["x", "nx"], vec![x, neg]).unwrap();
        let c = pearson_matrix(&p).unwrap();
        assert_eq!(c.get(0, 0), 1.0);
        assert!((c.get(0, 1) + 1.0).abs() < 1e-12);
        let flat = ReturnPanel::from_columns(&["a", "flat"], vec![vec![1.0, 2.0, 3.0], vec![0.5; 3]]).unwrap();
        assert!(matches!(pearson_matrix(&flat), Err(Error::ZeroVariance(l)) if l == "flat"));
    }

    #[test]
    fn pearson_matches_textbook_formula() {
        let cols = vec![
            vec![0.01, -0.02, 0.03, 0.00, -0.01],
            vec![0.02, -0.01, 0.01, 0.01, -0.03],
            vec![-0.01, 0.02, -0.02, 0.00, 0.04],
        ];
        let p = ReturnPanel::from_columns(&["a", "b", "c"], cols.clone()).unwrap();
        let c = pearson_matrix(&p).unwrap();
        let n = 5.0;
        for i in 0..3 {
            for j in 0..3 {
                let (x, y) = (&cols[i], &cols[j]);
                let mx = x.iter().sum::<f64>() / n;
                let my = y.iter().sum::<f64>() / n;
                let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1.0);
                let sx = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
                let sy = (y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
                assert!((c.get(i, j) - cov / (sx * sy)).abs() < 1e-12);
            }
        }
        assert!(c.is_symmetric(0.0));
    }

    #[test]
    fn correlation_is_positive_semidefinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cols: Vec<Vec<f64>> = (0..12).map(|_| (0..40).map(|_| rng.random::<f64>()).collect()).collect();
        let names: Vec<String> = labels(12);
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let c = pearson_matrix(&ReturnPanel::from_columns(&refs, cols).unwrap()).unwrap();
        let m = nalgebra::DMatrix::from_row_slice(12, 12, c.values());
        let min = m.symmetric_eigenvalues().min();
        assert!(min > -1e-10, "{min}");
    }

    #[test]
    fn distance_endpoints() {
        let c = LabeledMatrix::new(labels(2), vec![1.0, 0.0, 0.0, 1.0], MatrixKind::Correlation).unwrap();
        let d = correlation_distance(&c).unwrap();
        assert_eq!(d.get(0, 0), 0.0);
        assert!((d.get(0, 1) - 2f64.sqrt()).abs() < 1e-12);
        let c = LabeledMatrix::new(labels(2), vec![1.0, -1.0, -1.0, 1.0], MatrixKind::Correlation).unwrap();
        assert!((correlation_distance(&c).unwrap().get(0, 1) - 2.0).abs() < 1e-12);
        assert!(matches!(correlation_distance(&d), Err(Error::KindMismatch { .. })));
    }

    #[test]
    fn nte_distance_takes_minimum() {
        let m = LabeledMatrix::new(labels(2), vec![0.3, 0.5, 0.9, 0.2], MatrixKind::Nte).unwrap();
        let d = nte_distance(&m).unwrap();
        assert_eq!(d.get(0, 0), 0.0);
        assert_eq!(d.get(1, 1), 0.0);
        assert!((d.get(0, 1) - 0.2f64.sqrt()).abs() < 1e-12);
        assert_eq!(d.get(0, 1), d.get(1, 0));
        let ones = LabeledMatrix::new(labels(2), vec![1.0; 4], MatrixKind::Nte).unwrap();
        assert_eq!(nte_distance(&ones).unwrap().get(0, 1), 0.0);
    }

    #[test]
    fn max_offdiagonal() {
        let cols = vec![vec![1.0, 2.0, 3.0, 4.0], vec![2.0, 4.0, 6.0, 8.5], vec![4.0, 3.0, 2.0, 1.0]];
        let c = max_offdiagonal_correlation(&cols).unwrap();
        assert!(c > 0.99 && c <= 1.0);
    }
}
