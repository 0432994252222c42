//! Small dense linear-algebra helpers shared by the geometry and estimation code.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Extreme eigenvalues `(min, max)` of a symmetric matrix.
pub fn symmetric_eigen_range(m: &Matrix) -> (f64, f64) {
    let eig = m.clone().symmetric_eigen();
    let min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let max = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

pub fn max_asymmetry(m: &Matrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn principal_submatrix(m: &Matrix, idx: &[usize]) -> Matrix {
    Matrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])])
}

pub fn gather(v: &Vector, idx: &[usize]) -> Vector {
    Vector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

/// Which entry distribution feeds the QR factorisation in [`random_orthogonal`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryDistribution {
    Gaussian,
    Uniform,
}

/// Random orthogonal matrix from the QR factorisation of a random square matrix.
///
/// Column signs are normalised so that `R` has a non-negative diagonal, which
/// makes the result Haar distributed in the Gaussian case.
pub fn random_orthogonal<R: Rng + ?Sized>(
    d: usize,
    dist: EntryDistribution,
    rng: &mut R,
) -> Matrix {
    let uniform = Uniform::new_inclusive(-1.0, 1.0).expect("valid uniform range");
    let raw = Matrix::from_fn(d, d, |_, _| match dist {
        EntryDistribution::Gaussian => StandardNormal.sample(rng),
        EntryDistribution::Uniform => uniform.sample(rng),
    });
    let qr = raw.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Random symmetric positive-definite matrix with eigenvalues drawn uniformly
/// from `[eigen_min, 1]`; the largest eigenvalue is pinned to exactly 1 and
/// the smallest to `eigen_min`.
pub fn random_spd<R: Rng + ?Sized>(d: usize, eigen_min: f64, rng: &mut R) -> Matrix {
    let q = random_orthogonal(d, EntryDistribution::Gaussian, rng);
    let uniform = Uniform::new_inclusive(eigen_min, 1.0).expect("valid eigenvalue range");
    let mut eig: Vec<f64> = (0..d).map(|_| uniform.sample(rng)).collect();
    if d >= 1 {
        eig[0] = 1.0;
    }
    if d >= 2 {
        eig[1] = eigen_min;
    }
    let diag = Matrix::from_diagonal(&Vector::from_vec(eig));
    let a = &q * diag * q.transpose();
    // exact symmetry so validation never trips on round-off
    (&a + a.transpose()) * 0.5
}

/// Parse a dense square matrix from CSV text (one row per line, comma separated).
pub fn parse_matrix_csv(text: &str) -> Result<Matrix, String> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| cell.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| format!("line {}: {e}", lineno + 1))?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err("empty matrix".into());
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != n) {
        return Err(format!(
            "row {} has {} columns, expected {n}",
            bad + 1,
            rows[bad].len()
        ));
    }
    Ok(Matrix::from_fn(n, n, |r, c| rows[r][c]))
}
