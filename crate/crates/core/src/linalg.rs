//! Dense linear-algebra helpers shared by the solvers.
//!
//! Everything here works on `nalgebra` dynamic matrices. Vectorization uses
//! column stacking, so `vec(A B C) = (Cᵀ ⊗ A) vec(B)`; nalgebra stores
//! matrices column-major which makes `vec` a plain copy of the storage.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest absolute entry-wise deviation from symmetry.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Smallest eigenvalue of the symmetric part of `m`. Empty matrices report `+inf`.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Symmetric positive semi-definite square root; negative eigenvalues are clamped to zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() == 0 {
        return m.clone();
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut v = eig.eigenvectors.clone();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        v.column_mut(k).scale_mut(s);
    }
    symmetrize(&(&v * eig.eigenvectors.transpose()))
}

/// Eigenvalues of a general real square matrix.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    m.complex_eigenvalues().iter().copied().collect()
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Column-stacking vectorization.
pub fn vec(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`].
pub fn unvec(v: &[f64], rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(rows, cols, v)
}

/// Stack matrices with a common column count on top of each other.
pub fn vstack(blocks: &[DMatrix<f64>], ncols: usize) -> DMatrix<f64> {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, ncols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), ncols)).copy_from(b);
        r += b.nrows();
    }
    out
}

pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Assemble a matrix from a grid of blocks `blocks[i][j]`.
pub fn assemble(blocks: &[Vec<DMatrix<f64>>]) -> DMatrix<f64> {
    let rows: usize = blocks
        .iter()
        .map(|row| row.first().map_or(0, |b| b.nrows()))
        .sum();
    let cols: usize = blocks
        .first()
        .map_or(0, |row| row.iter().map(|b| b.ncols()).sum());
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for row in blocks {
        let mut c = 0;
        let h = row.first().map_or(0, |b| b.nrows());
        for b in row {
            out.view_mut((r, c), b.shape()).copy_from(b);
            c += b.ncols();
        }
        r += h;
    }
    out
}

/// `[I, A, A², …, A^k]`.
pub fn powers(a: &DMatrix<f64>, k: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(k + 1);
    out.push(DMatrix::identity(a.nrows(), a.ncols()));
    for p in 1..=k {
        let next = a * &out[p - 1];
        out.push(next);
    }
    out
}

/// Cholesky factorization of the symmetric part of `m`, with a diagnostic on failure.
pub fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(symmetrize(m)).ok_or_else(|| Error::NotPositiveDefinite {
        what: what.to_string(),
        min_eigenvalue: min_eigenvalue(m),
    })
}

/// Solve `M X = B` for symmetric positive definite `M`, with one step of iterative refinement.
pub fn spd_solve(m: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let chol = cholesky(m, what)?;
    let mut x = chol.solve(b);
    let r = b - m * &x;
    x += chol.solve(&r);
    Ok(x)
}

/// `B M⁻¹` for symmetric positive definite `M`.
pub fn right_spd_solve(b: &DMatrix<f64>, m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    Ok(spd_solve(m, &b.transpose(), what)?.transpose())
}

/// Numerical rank from singular values: counts `σ > tol_rel · σ_max`.
/// Returns the rank and the smallest singular value relative to the largest.
pub fn complex_rank(m: &DMatrix<Complex64>, tol_rel: f64) -> (usize, f64) {
    if m.nrows() == 0 || m.ncols() == 0 {
        return (0, 0.0);
    }
    let sv = m.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return (0, 0.0);
    }
    let rank = sv.iter().filter(|&&s| s > tol_rel * max).count();
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    (rank, min / max)
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}
