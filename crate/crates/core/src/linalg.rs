//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Condition number above which a covariance is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;
/// Floor applied to eigenvalues when forming matrix square roots.
pub const EIGEN_FLOOR: f64 = 1e-14;

/// All eigenvalues of a general real square matrix.
pub fn spectrum(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if let Some(schur) = nalgebra::Schur::try_new(m.clone(), 1e-14, 100_000) {
        return Ok(schur.complex_eigenvalues().iter().copied().collect());
    }
    // retry under fixed orthogonal similarities
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    for _ in 0..4 {
        let q = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)).qr().q();
        let rotated = q.transpose() * m * &q;
        if let Some(schur) = nalgebra::Schur::try_new(rotated, 1e-13, 100_000) {
            return Ok(schur.complex_eigenvalues().iter().copied().collect());
        }
    }
    Err(Error::EigenFailure(n))
}

pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    Ok(spectrum(m)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// `(sign, log|det|)` through an LU factorisation. Sign is 0 for exactly singular input.
pub fn log_abs_det(m: &DMatrix<f64>) -> (f64, f64) {
    let n = m.nrows();
    if n == 0 {
        return (1.0, 0.0);
    }
    let lu = m.clone().lu();
    let u = lu.u();
    let mut sign: f64 = lu.p().determinant();
    let mut acc = 0.0;
    for i in 0..n {
        let d = u[(i, i)];
        if d == 0.0 {
            return (0.0, f64::NEG_INFINITY);
        }
        if d < 0.0 {
            sign = -sign;
        }
        acc += d.abs().ln();
    }
    (sign, acc)
}

pub fn symmetrize(m: &mut DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let a = m[(i, j)];
            let b = m[(j, i)];
            asym = asym.max((a - b).abs());
            let avg = 0.5 * (a + b);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    asym
}

/// Inverse of a symmetric positive-definite matrix, rejecting ill-conditioned input.
pub fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let ev = sym_eigenvalues(m);
    if let (Some(lo), Some(hi)) = (ev.first(), ev.last()) {
        if *lo <= 0.0 || hi / lo > SINGULAR_CONDITION {
            return Err(Error::SingularCovariance(format!(
                "{what}: eigenvalues in [{lo:e}, {hi:e}]"
            )));
        }
    }
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::SingularCovariance(what.to_string()))
}

/// `m^{-1/2}` for symmetric positive semidefinite `m`.
pub fn inv_sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let d = eig.eigenvalues.map(|l| 1.0 / l.max(EIGEN_FLOOR).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// `m^{1/2}` for symmetric positive semidefinite `m`.
pub fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let d = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// Largest singular value.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].abs();
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Exact determinant of an integer matrix (fraction-free Bareiss elimination).
pub fn bareiss_det(mut a: Vec<Vec<i128>>) -> i128 {
    let n = a.len();
    if n == 0 {
        return 1;
    }
    let mut sign = 1;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&r| a[r][k] != 0) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_abs_matrix(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Relative difference `|a-b| / max(|a|,|b|)`, or the absolute one when both are tiny.
pub fn relative_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-300 {
        0.0
    } else {
        (a - b).abs() / scale.max(1e-300)
    }
}

/// Greedy matching of two eigenvalue lists; returns the worst matched distance.
pub fn spectrum_distance(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let mut best = None;
        for (k, y) in b.iter().enumerate() {
            if used[k] {
                continue;
            }
            let d = (x - y).norm();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((k, d));
            }
        }
        if let Some((k, d)) = best {
            used[k] = true;
            worst = worst.max(d);
        }
    }
    worst
}
