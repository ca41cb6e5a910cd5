//! Small dense helpers on top of nalgebra.

use nalgebra::linalg::Schur;
use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest eigenvalue of a symmetric matrix (0 for an empty matrix).
pub fn sym_max_eig(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    symmetrize(m).symmetric_eigenvalues().max()
}

pub fn sym_min_eig(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    symmetrize(m).symmetric_eigenvalues().min()
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Spectral norm `sqrt(λ_max(Mᵀ M))`.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    sym_max_eig(&(m.transpose() * m)).max(0.0).sqrt()
}

/// Orthonormal basis of the numerical null space: right singular vectors with
/// singular value at most `tol`, ordered by increasing singular value.
pub fn null_space(m: &DMatrix<f64>, tol: f64) -> Result<Vec<DVector<f64>>> {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Numerical("SVD did not return V".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    // a square input has as many singular values as columns
    Ok(order
        .into_iter()
        .filter(|&k| svd.singular_values[k] <= tol)
        .map(|k| v_t.row(k).transpose())
        .collect())
}

pub fn complex_null_space(m: &DMatrix<Complex<f64>>, tol: f64) -> Result<Vec<DVector<Complex<f64>>>> {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Numerical("SVD did not return V".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    Ok(order
        .into_iter()
        .filter(|&k| svd.singular_values[k] <= tol)
        .map(|k| v_t.row(k).adjoint())
        .collect())
}

/// Real part of the smallest singular value gap check used to detect rank.
pub fn smallest_singular_values(m: &DMatrix<f64>, count: usize) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(f64::total_cmp);
    s.truncate(count);
    s
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex<f64>> {
    m.map(|v| Complex::new(v, 0.0))
}

const SCHUR_MAX_ITER: usize = 10_000;

/// Complex Schur form `m = U T Uᴴ` with a bounded QR iteration. When the iteration
/// stalls, retries on `QᵀmQ` for a few fixed orthogonal `Q`.
pub fn schur(m: &DMatrix<Complex<f64>>) -> Result<(DMatrix<Complex<f64>>, DMatrix<Complex<f64>>)> {
    if let Some(s) = Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITER) {
        return Ok(s.unpack());
    }
    let n = m.nrows();
    for attempt in 1..=3 {
        let seed = DMatrix::from_fn(n, n, |i, j| ((attempt * 7919 + i * n + j) as f64 * 0.618_033_988_75).sin());
        let q = to_complex(&seed.qr().q());
        let rotated = q.adjoint() * m * &q;
        if let Some(s) = Schur::try_new(rotated, f64::EPSILON, SCHUR_MAX_ITER) {
            let (u, t) = s.unpack();
            return Ok((q * u, t));
        }
    }
    Err(Error::Numerical("Schur iteration did not converge".into()))
}

/// Eigenvalues of a real square matrix.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let (_, t) = schur(&to_complex(m))?;
    Ok(t.diagonal().iter().copied().collect())
}
