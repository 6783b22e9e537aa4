//! Small dense linear algebra helpers on top of faer.

use alloc::vec::Vec;

use faer::{Mat, Side};

use crate::{c64, Error, Result};

#[inline]
pub fn cabs(z: c64) -> f64 {
    libm::hypot(z.re, z.im)
}

/// `(A + Aᴴ) / 2`.
pub fn hermitize(a: &Mat<c64>) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

/// Largest `|A - Aᴴ|` entry.
pub fn hermitian_defect(a: &Mat<c64>) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            d = d.max(cabs(a[(i, j)] - a[(j, i)].conj()));
        }
    }
    d
}

pub fn conj(a: &Mat<c64>) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].conj())
}

pub fn frobenius(a: &Mat<c64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    libm::sqrt(s)
}

pub fn column_norm(a: &Mat<c64>, j: usize) -> f64 {
    libm::sqrt((0..a.nrows()).map(|i| a[(i, j)].norm_sqr()).sum())
}

/// Scales every nonzero column to unit Euclidean norm.
pub fn normalize_columns(a: &Mat<c64>) -> Mat<c64> {
    let norms: Vec<f64> = (0..a.ncols()).map(|j| column_norm(a, j)).collect();
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| if norms[j] > 0.0 { a[(i, j)] / norms[j] } else { a[(i, j)] })
}

/// The first `k` columns.
pub fn take_columns(a: &Mat<c64>, k: usize) -> Mat<c64> {
    Mat::from_fn(a.nrows(), k, |i, j| a[(i, j)])
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues in descending
/// order and a deterministic gauge: each eigenvector is scaled so its
/// largest-magnitude entry is real positive; within a (near-)degenerate cluster
/// (relative gap below `1e-10`) vectors are ordered by the position of that
/// entry.
pub fn hermitian_eigen_desc(a: &Mat<c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    let h = hermitize(a);
    let evd = h.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigen)?;
    let n = h.nrows();
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut lam: Vec<f64> = (0..n).rev().map(|k| s[k].re).collect();
    let mut vecs = Mat::<c64>::from_fn(n, n, |i, j| u[(i, n - 1 - j)]);
    let mut lead = Vec::with_capacity(n);
    for j in 0..n {
        let mut best = 0;
        let mut bv = -1.0;
        for i in 0..n {
            let v = vecs[(i, j)].norm_sqr();
            // strict comparison with a small relative margin keeps the lowest index on ties
            if v > bv * (1.0 + 1e-12) {
                bv = v;
                best = i;
            }
        }
        let p = vecs[(best, j)];
        let ph = p.conj() / cabs(p);
        for i in 0..n {
            vecs[(i, j)] *= ph;
        }
        vecs[(best, j)] = c64::new(cabs(p), 0.0);
        lead.push(best);
    }
    let scale = lam.first().map(|l| l.abs()).unwrap_or(0.0).max(f64::MIN_POSITIVE);
    let mut start = 0;
    let mut order: Vec<usize> = (0..n).collect();
    while start < n {
        let mut end = start + 1;
        while end < n && (lam[end - 1] - lam[end]).abs() < 1e-10 * scale {
            end += 1;
        }
        order[start..end].sort_by_key(|&k| (lead[k], k));
        start = end;
    }
    let lam_sorted: Vec<f64> = order.iter().map(|&k| lam[k]).collect();
    let sorted = Mat::<c64>::from_fn(n, n, |i, j| vecs[(i, order[j])]);
    lam = lam_sorted;
    vecs = sorted;
    Ok((lam, vecs))
}

pub fn hermitian_eigenvalues_desc(a: &Mat<c64>) -> Result<Vec<f64>> {
    let h = hermitize(a);
    let mut v = h.self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::Eigen)?;
    v.reverse();
    Ok(v)
}

/// `log10 det` of a Hermitian positive semidefinite matrix; `-∞` when singular.
pub fn log10_det_hermitian(a: &Mat<c64>) -> Result<f64> {
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let lam = hermitian_eigenvalues_desc(a)?;
    if lam.iter().any(|&l| l <= 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(lam.iter().map(|&l| libm::log10(l)).sum())
}

pub fn det_hermitian(a: &Mat<c64>) -> Result<f64> {
    let lam = hermitian_eigenvalues_desc(a)?;
    Ok(lam.iter().product())
}
