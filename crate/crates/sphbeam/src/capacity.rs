//! Average channel capacity with an equal power split and rank adaptation.

use alloc::vec::Vec;

use faer::Mat;

use crate::linalg::hermitian_eigenvalues_desc;
use crate::{c64, Error, Result};

/// Eigenvalues below this fraction of the largest are treated as zero.
pub const EIGEN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityReport {
    /// `(λ_m, C_m)` per stream at the chosen stream count, λ descending.
    pub per_stream: Vec<(f64, f64)>,
    pub total: f64,
    pub m_opt: usize,
    /// Transmit-to-noise power ratio `P / P_n` used.
    pub snr: f64,
    /// Total capacity for every evaluated stream count `1..=M_max`.
    pub by_streams: Vec<f64>,
}

/// Eigenvalues of a beam-space correlation matrix, descending, with roundoff
/// negatives and values below `EIGEN_FLOOR · λ_1` set to zero.
pub fn stream_eigenvalues(r: &Mat<c64>) -> Result<Vec<f64>> {
    let mut lam = hermitian_eigenvalues_desc(r)?;
    let trace: f64 = (0..r.nrows()).map(|i| r[(i, i)].re).sum();
    if let Some(&min) = lam.last() {
        if min < -1e-10 * trace.abs() {
            return Err(Error::NotPsd(min));
        }
    }
    let floor = EIGEN_FLOOR * lam.first().copied().unwrap_or(0.0).max(0.0);
    for l in lam.iter_mut() {
        if *l < floor {
            *l = 0.0;
        }
    }
    Ok(lam)
}

fn per_stream(lam: &[f64], snr: f64) -> Vec<(f64, f64)> {
    let m = lam.len() as f64;
    lam.iter().map(|&l| (l, libm::log2(1.0 + l * snr / m))).collect()
}

/// `Σ_m log2(1 + λ_m · snr / M)` over the eigenvalues of `r`, with `M = dim r`.
pub fn average_capacity(r: &Mat<c64>, snr: f64) -> Result<f64> {
    if !(snr > 0.0) {
        return Err(Error::InvalidParameter("snr must be positive"));
    }
    Ok(per_stream(&stream_eigenvalues(r)?, snr).iter().map(|p| p.1).sum())
}

/// Evaluates `family(M)` for `M = 1..=m_max` and keeps the stream count with
/// the highest capacity; ties go to the smaller `M`.
pub fn rank_adapt(family: &mut dyn FnMut(usize) -> Result<Mat<c64>>, m_max: usize, snr: f64) -> Result<CapacityReport> {
    if m_max == 0 {
        return Err(Error::InvalidParameter("m_max must be at least 1"));
    }
    if !(snr > 0.0) {
        return Err(Error::InvalidParameter("snr must be positive"));
    }
    let mut best: Option<CapacityReport> = None;
    let mut by_streams = Vec::with_capacity(m_max);
    for m in 1..=m_max {
        let r = family(m)?;
        if r.nrows() != m || r.ncols() != m {
            return Err(Error::Dimension("family returned a matrix of the wrong size"));
        }
        let ps = per_stream(&stream_eigenvalues(&r)?, snr);
        let total: f64 = ps.iter().map(|p| p.1).sum();
        by_streams.push(total);
        if best.as_ref().is_none_or(|b| total > b.total) {
            best = Some(CapacityReport { per_stream: ps, total, m_opt: m, snr, by_streams: Vec::new() });
        }
    }
    let mut rep = best.expect("m_max >= 1");
    rep.by_streams = by_streams;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> Mat<c64> {
        Mat::from_fn(v.len(), v.len(), |i, j| if i == j { c64::new(v[i], 0.0) } else { c64::new(0.0, 0.0) })
    }

    #[test]
    fn identity_examples() {
        assert!((average_capacity(&diag(&[1.0]), 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((average_capacity(&diag(&[1.0; 4]), 4.0).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn rank_one_family_picks_one_stream() {
        let rep = rank_adapt(
            &mut |m| {
                let mut v = alloc::vec![0.0; m];
                v[0] = 5.0;
                Ok(diag(&v))
            },
            6,
            1.0,
        )
        .unwrap();
        assert_eq!(rep.m_opt, 1);
        assert_eq!(rep.by_streams.len(), 6);
        assert!((rep.total - rep.per_stream.iter().map(|p| p.1).sum::<f64>()).abs() < 1e-15);
    }

    #[test]
    fn rejects_indefinite() {
        let r = diag(&[1.0, -0.5]);
        assert!(matches!(average_capacity(&r, 1.0), Err(Error::NotPsd(_))));
    }

    #[test]
    fn tiny_eigenvalues_are_clamped() {
        let lam = stream_eigenvalues(&diag(&[1.0, 1e-14, -1e-15])).unwrap();
        assert_eq!(lam, alloc::vec![1.0, 0.0, 0.0]);
    }
}
