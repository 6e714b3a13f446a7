use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Hermitian asymmetry allowed before a matrix is rejected.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Most negative eigenvalue accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-10;

pub fn max_asymmetry(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn ensure_square(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(())
}

/// Rejects matrices whose asymmetry exceeds `HERMITIAN_TOL` relative to max(1, ‖m‖_max).
pub fn ensure_hermitian(m: &CMatrix) -> Result<()> {
    ensure_square(m)?;
    let scale = m.iter().fold(1.0f64, |s, z| s.max(z.norm()));
    let asym = max_asymmetry(m);
    if asym > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian(asym));
    }
    Ok(())
}

fn symmetrized(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = symmetrized(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending, eigenvectors as columns.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let eig = symmetrized(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (vals, vecs)
}

/// Largest ‖Mv − λv‖ over the computed eigenpairs.
pub fn eigen_residual(m: &CMatrix, vals: &[f64], vecs: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for (j, &l) in vals.iter().enumerate() {
        let v = vecs.column(j);
        let r = m * v - v * Complex64::new(l, 0.0);
        worst = worst.max(r.norm());
    }
    worst
}

pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.singular_values().iter().fold(0.0f64, |a, &b| a.max(b))
}

/// Extremal eigenvalues (min, max) of a Hermitian PSD matrix, validated.
pub fn psd_extremes(m: &CMatrix) -> Result<(f64, f64)> {
    ensure_hermitian(m)?;
    let vals = hermitian_eigenvalues(m);
    let lo = vals[0];
    let hi = vals[vals.len() - 1];
    if lo < -PSD_TOL * hi.abs().max(1.0) {
        return Err(Error::NotPsd(lo));
    }
    Ok((lo, hi))
}

/// `V` with `G = V* V`, from the eigendecomposition `G = Q Λ Q*` as `V = Λ^{1/2} Q*`.
pub fn psd_factor(g: &CMatrix) -> Result<CMatrix> {
    ensure_hermitian(g)?;
    let (vals, q) = hermitian_eigen(g);
    let top = vals.last().copied().unwrap_or(0.0).abs().max(1.0);
    if let Some(&lo) = vals.first() {
        if lo < -PSD_TOL * top {
            return Err(Error::NotPsd(lo));
        }
    }
    let n = g.nrows();
    let mut v = q.adjoint();
    for i in 0..n {
        let s = vals[i].max(0.0).sqrt();
        for j in 0..n {
            v[(i, j)] *= s;
        }
    }
    Ok(v)
}

/// Inverse of a Hermitian positive definite matrix via its eigendecomposition.
pub fn hermitian_pd_inverse(g: &CMatrix, min_eig: f64) -> Result<CMatrix> {
    ensure_hermitian(g)?;
    let (vals, q) = hermitian_eigen(g);
    let lo = vals.first().copied().unwrap_or(1.0);
    if lo <= min_eig {
        return Err(Error::SingularGram(lo));
    }
    let n = g.nrows();
    let mut scaled = q.clone();
    for j in 0..n {
        let s = 1.0 / vals[j];
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    Ok(symmetrized(&(scaled * q.adjoint())))
}

/// Trailing principal submatrix starting at zero-based row/column `start`.
pub fn trailing(m: &CMatrix, start: usize) -> CMatrix {
    let n = m.nrows();
    m.view((start, start), (n - start, n - start)).into_owned()
}
