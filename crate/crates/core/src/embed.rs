//! Low-dimensional coordinates from a distance matrix: classical MDS as the
//! starting point, SMACOF majorization to lower Kruskal stress.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{LabeledMatrix, MatrixKind};
use crate::par;

pub const DEFAULT_DIM: usize = 2;
pub const DEFAULT_REFINE_ITERS: usize = 500;
pub const DEFAULT_REFINE_TOL: f64 = 1e-9;

const EIGEN_TOL: f64 = 1e-13;
const EIGEN_MAX_STEPS: usize = 20_000;
const EIGEN_OVERSAMPLE: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub labels: Vec<String>,
    /// One row of `dim` coordinates per label.
    pub coords: Vec<Vec<f64>>,
    pub stress: f64,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.coords.first().map_or(0, Vec::len)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        euclid(&self.coords[i], &self.coords[j])
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Kruskal stress `sqrt(Σ_{i<j} (d_ij - |x_i - x_j|)² / Σ_{i<j} d_ij²)`.
pub fn stress(coords: &[Vec<f64>], dist: &LabeledMatrix) -> Result<f64> {
    let n = dist.n();
    if coords.len() != n {
        return Err(Error::ShapeMismatch(format!("{} coordinate rows for {n} labels", coords.len())));
    }
    if let Some(bad) = coords.iter().find(|c| c.len() != coords[0].len()) {
        return Err(Error::ShapeMismatch(format!(
            "coordinate rows of length {} and {}",
            coords[0].len(),
            bad.len()
        )));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist.get(i, j);
            let r = d - euclid(&coords[i], &coords[j]);
            num += r * r;
            den += d * d;
        }
    }
    Ok(if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        (num / den).sqrt()
    })
}

fn check_distance(dist: &LabeledMatrix, m: usize) -> Result<()> {
    dist.expect_kind(&[MatrixKind::Distance])?;
    if m == 0 || dist.n() < m + 1 {
        return Err(Error::ShapeTooSmall(format!(
            "embedding {} points in {m} dimensions needs at least {} points",
            dist.n(),
            m + 1
        )));
    }
    Ok(())
}

/// Double-centered matrix `-1/2 J D² J`.
fn gram(dist: &LabeledMatrix) -> DMatrix<f64> {
    let n = dist.n();
    let mut b = DMatrix::from_fn(n, n, |i, j| {
        let d = 0.5 * (dist.get(i, j) + dist.get(j, i));
        -0.5 * d * d
    });
    let row_means: Vec<f64> = (0..n).map(|i| b.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] += grand - row_means[i] - row_means[j];
        }
    }
    b
}

/// Approximate smallest eigenvalue of symmetric `b` by power iteration on
/// `ρI - b`, with `ρ` a Gershgorin bound.
fn smallest_eigenvalue(b: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> f64 {
    let n = b.nrows();
    let rho = (0..n).map(|i| b.row(i).abs().sum()).fold(0.0, f64::max);
    if rho == 0.0 {
        return 0.0;
    }
    let c = DMatrix::identity(n, n) * rho - b;
    let mut x = DMatrix::from_fn(n, 1, |_, _| rng.random::<f64>() - 0.5);
    x /= x.norm();
    let mut mu = 0.0;
    for _ in 0..2_000 {
        let y = &c * &x;
        let next = x.dot(&y);
        let norm = y.norm();
        if norm == 0.0 {
            break;
        }
        x = y / norm;
        if (next - mu).abs() <= 1e-9 * rho {
            mu = next;
            break;
        }
        mu = next;
    }
    rho - mu
}

/// Top-`m` eigenpairs of symmetric `b` (largest algebraic value first) by
/// subspace iteration with Rayleigh-Ritz extraction.
fn top_eigenpairs(b: &DMatrix<f64>, m: usize) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = b.nrows();
    let p = (m + EIGEN_OVERSAMPLE).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d64_735f_7374_6172);
    let shift = (-smallest_eigenvalue(b, &mut rng)).max(0.0) * 1.05;
    let a = b + DMatrix::identity(n, n) * shift;
    let scale = a.norm().max(f64::MIN_POSITIVE);

    let mut q = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>() - 0.5).qr().q();
    let mut prev = vec![f64::INFINITY; m];
    for _ in 0..EIGEN_MAX_STEPS {
        let z = &a * &q;
        let h = q.transpose() * &z;
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let ritz: Vec<f64> = order.iter().take(m).map(|&i| eig.eigenvalues[i]).collect();

        let vectors = &q * &eig.eigenvectors;
        let residual = order
            .iter()
            .take(m)
            .map(|&i| {
                let v = vectors.column(i);
                (&a * v - v * eig.eigenvalues[i]).norm()
            })
            .fold(0.0, f64::max);
        let settled = ritz.iter().zip(&prev).all(|(r, p)| (r - p).abs() <= EIGEN_TOL * scale);
        if residual <= 1e-10 * scale || (settled && residual <= 1e-7 * scale) {
            return Ok(order
                .iter()
                .take(m)
                .map(|&i| {
                    let mut v: Vec<f64> = vectors.column(i).iter().copied().collect();
                    orient(&mut v);
                    (eig.eigenvalues[i] - shift, v)
                })
                .collect());
        }
        prev = ritz;
        q = z.qr().q();
    }
    Err(Error::NonConvergence { steps: EIGEN_MAX_STEPS })
}

/// Fixes the sign of an eigenvector: its largest-magnitude entry (first on
/// ties) is made positive.
fn orient(v: &mut [f64]) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() * (1.0 + 1e-9) {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Classical (Torgerson) MDS into `m` dimensions. Negative eigenvalues give
/// zero coordinates.
pub fn classical_mds(dist: &LabeledMatrix, m: usize) -> Result<Embedding> {
    check_distance(dist, m)?;
    if dist.values().iter().all(|&d| d == 0.0) {
        return Err(Error::DegenerateInput("all distances are zero".into()));
    }
    let n = dist.n();
    let b = gram(dist);
    let pairs = top_eigenpairs(&b, m)?;
    let coords: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            pairs
                .iter()
                .map(|(lambda, v)| if *lambda > 0.0 { v[i] * lambda.sqrt() } else { 0.0 })
                .collect()
        })
        .collect();
    let s = stress(&coords, dist)?;
    Ok(Embedding {
        labels: dist.labels().to_vec(),
        coords,
        stress: s,
    })
}

/// One Guttman transform: `X' = B(X) X / n` with unit weights.
fn guttman(x: &[Vec<f64>], dist: &LabeledMatrix) -> Vec<Vec<f64>> {
    let n = x.len();
    let dim = x[0].len();
    par::map_indices(n, |i| {
        let mut out = vec![0.0; dim];
        for j in 0..n {
            if j == i {
                continue;
            }
            let e = euclid(&x[i], &x[j]);
            if e == 0.0 {
                continue;
            }
            let w = dist.get(i, j) / e;
            for a in 0..dim {
                out[a] += w * (x[i][a] - x[j][a]);
            }
        }
        out.iter_mut().for_each(|v| *v /= n as f64);
        out
    })
}

/// SMACOF refinement. Returns the improved embedding and the stress after
/// each accepted iteration (starting with the input stress); the sequence is
/// non-increasing.
pub fn refine_with_trace(
    embedding: &Embedding,
    dist: &LabeledMatrix,
    max_iters: usize,
    tol: f64,
) -> Result<(Embedding, Vec<f64>)> {
    dist.expect_kind(&[MatrixKind::Distance])?;
    if embedding.labels != dist.labels() {
        return Err(Error::LabelMismatch);
    }
    let mut best = embedding.coords.clone();
    let mut best_stress = stress(&best, dist)?;
    let mut trace = vec![best_stress];
    if best.is_empty() || best_stress == 0.0 || !best_stress.is_finite() {
        let out = Embedding { stress: best_stress, ..embedding.clone() };
        return Ok((out, trace));
    }
    for _ in 0..max_iters {
        let next = guttman(&best, dist);
        let s = stress(&next, dist)?;
        if !(s <= best_stress) {
            break;
        }
        let improvement = (best_stress - s) / best_stress;
        best = next;
        best_stress = s;
        trace.push(s);
        if improvement < tol || s == 0.0 {
            break;
        }
    }
    Ok((
        Embedding {
            labels: embedding.labels.clone(),
            coords: best,
            stress: best_stress,
        },
        trace,
    ))
}

pub fn refine(embedding: &Embedding, dist: &LabeledMatrix, max_iters: usize, tol: f64) -> Result<Embedding> {
    refine_with_trace(embedding, dist, max_iters, tol).map(|(e, _)| e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("P{i}")).collect()
    }

    fn dist_from_points(points: &[Vec<f64>]) -> LabeledMatrix {
        let n = points.len();
        let values = (0..n * n).map(|k| euclid(&points[k / n], &points[k % n])).collect();
        LabeledMatrix::new(labels(n), values, MatrixKind::Distance).unwrap()
    }

    fn random_points(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn equilateral_triangle() {
        let d = LabeledMatrix::new(labels(3), vec![0., 1., 1., 1., 0., 1., 1., 1., 0.], MatrixKind::Distance).unwrap();
        let e = classical_mds(&d, 2).unwrap();
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            assert!((e.distance(i, j) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn two_points() {
        let d = LabeledMatrix::new(labels(2), vec![0., 3.5, 3.5, 0.], MatrixKind::Distance).unwrap();
        let e = classical_mds(&d, 1).unwrap();
        assert!((e.distance(0, 1) - 3.5).abs() < 1e-12);
    }

    #[test]
    fn planted_points_recovered() {
        for seed in 0..5 {
            let d = dist_from_points(&random_points(12, 2, seed));
            let e = classical_mds(&d, 2).unwrap();
            assert!(e.stress < 1e-9, "seed {seed}: {}", e.stress);
            let r = refine(&e, &d, DEFAULT_REFINE_ITERS, DEFAULT_REFINE_TOL).unwrap();
            assert!(r.stress <= e.stress);
        }
    }

    #[test]
    fn higher_dimensional_input() {
        let d = dist_from_points(&random_points(15, 4, 8));
        let e3 = classical_mds(&d, 3).unwrap();
        let e4 = classical_mds(&d, 4).unwrap();
        assert!(e4.stress < 1e-9);
        assert!(e3.stress > e4.stress);
    }

    #[test]
    fn stress_cases() {
        let d = LabeledMatrix::new(labels(3), vec![0., 3., 4., 3., 0., 5., 4., 5., 0.], MatrixKind::Distance).unwrap();
        assert_eq!(stress(&vec![vec![0.0, 0.0]; 3], &d).unwrap(), 1.0);
        let exact = vec![vec![0.0, 0.0], vec![3.0, 0.0], vec![0.0, 4.0]];
        assert_eq!(stress(&exact, &d).unwrap(), 0.0);
        // Two-line hand evaluation: points on a line at 0, 3, 4.
        let line = vec![vec![0.0], vec![3.0], vec![4.0]];
        let expected = ((0.0f64 + 0.0 + 16.0) / (9.0 + 16.0 + 25.0)).sqrt();
        assert!((stress(&line, &d).unwrap() - expected).abs() < 1e-15);
        assert!(matches!(stress(&line[..2], &d), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn errors() {
        let z = LabeledMatrix::zeros(labels(4), MatrixKind::Distance).unwrap();
        assert!(matches!(classical_mds(&z, 2), Err(Error::DegenerateInput(_))));
        let c = LabeledMatrix::zeros(labels(4), MatrixKind::Correlation).unwrap();
        assert!(matches!(classical_mds(&c, 2), Err(Error::KindMismatch { .. })));
        let d = dist_from_points(&random_points(2, 2, 1));
        assert!(matches!(classical_mds(&d, 2), Err(Error::ShapeTooSmall(_))));
    }

    #[test]
    fn refine_decreases_on_non_metric_input() {
        // d(0,2) far exceeds d(0,1) + d(1,2).
        let values = vec![
            0.0, 1.0, 5.0, 1.0, //
            1.0, 0.0, 1.0, 1.0, //
            5.0, 1.0, 0.0, 1.0, //
            1.0, 1.0, 1.0, 0.0,
        ];
        let d = LabeledMatrix::new(labels(4), values, MatrixKind::Distance).unwrap();
        let e = classical_mds(&d, 2).unwrap();
        let (r, trace) = refine_with_trace(&e, &d, DEFAULT_REFINE_ITERS, DEFAULT_REFINE_TOL).unwrap();
        assert!(trace[1] < trace[0]);
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(r.stress, *trace.last().unwrap());
        assert!((stress(&r.coords, &d).unwrap() - r.stress).abs() == 0.0);
    }

    #[test]
    fn already_optimal_is_unchanged() {
        let d = dist_from_points(&random_points(6, 2, 3));
        let e = classical_mds(&d, 2).unwrap();
        let r = refine(&e, &d, 50, 1e-9).unwrap();
        assert!((r.stress - e.stress).abs() <= 1e-9);
    }

    #[test]
    fn permutation_and_rigid_motion() {
        let pts = random_points(9, 2, 11);
        let d = dist_from_points(&pts);
        let e = classical_mds(&d, 2).unwrap();
        let perm = [4, 0, 7, 2, 8, 1, 3, 6, 5];
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| pts[i].clone()).collect();
        let ep = classical_mds(&dist_from_points(&permuted), 2).unwrap();
        for a in 0..9 {
            for b in 0..9 {
                assert!((ep.distance(a, b) - e.distance(perm[a], perm[b])).abs() < 1e-9);
            }
        }
        let theta = 0.7f64;
        let moved: Vec<Vec<f64>> = e
            .coords
            .iter()
            .map(|c| {
                vec![
                    theta.cos() * c[0] - theta.sin() * c[1] + 3.0,
                    -(theta.sin() * c[0] + theta.cos() * c[1]) - 1.0,
                ]
            })
            .collect();
        let noisy = d.map(MatrixKind::Distance, |v| v * 1.1);
        assert!((stress(&moved, &noisy).unwrap() - stress(&e.coords, &noisy).unwrap()).abs() < 1e-12);
    }
}
