use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::{Error, Result};

/// Smallest relative jitter tried before a factorization is declared failed.
pub(crate) const JITTER_START: f64 = 1e-10;
/// Largest relative jitter.
pub(crate) const JITTER_MAX: f64 = 1e-4;

pub(crate) type Chol = Cholesky<f64, Dyn>;

/// Cholesky factorization with diagonal jitter escalated by ×10 from
/// `1e-10·scale` up to `1e-4·scale`. Returns the factor and the jitter used.
pub(crate) fn jittered_cholesky(mat: &DMatrix<f64>, scale: f64) -> Result<(Chol, f64)> {
    let scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
    let mut rel = JITTER_START;
    loop {
        let jitter = rel * scale;
        let mut m = mat.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(ch) = Cholesky::new(m) {
            return Ok((ch, jitter));
        }
        if rel >= JITTER_MAX * 0.999 {
            return Err(Error::IllConditioned { jitter });
        }
        rel *= 10.0;
    }
}

pub(crate) fn max_diag(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].abs()).fold(0.0, f64::max)
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Symmetric square root `S` with `S Sᵀ = m` for a PSD matrix; negative
/// eigenvalues are clamped to zero.
pub(crate) fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut sym = m.clone();
    symmetrize(&mut sym);
    let eig = sym.symmetric_eigen();
    let mut v = eig.eigenvectors;
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = libm::sqrt(lam.max(0.0));
        for i in 0..v.nrows() {
            v[(i, j)] *= s;
        }
    }
    v
}

#[cfg(test)]
pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let mut sym = m.clone();
    symmetrize(&mut sym);
    sym.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}
