//! Mode-space and beam-space channel correlation matrices.
//!
//! An SMC matrix `Q` (J × M) holds one beam pattern per column,
//! `g_m(ψ) = Σ_j Q[j, m] K_j(ψ)`. The mode-space correlation is
//! `R_sph[i, j] = ∫ K_i(ψ) · K_j(ψ)* P(ψ) dψ`, so that the beam-space correlation
//! of the patterns is `Qᵀ R_sph Q*`.

use alloc::vec;
use alloc::vec::Vec;

use faer::Mat;

use crate::angular_profile::{DirectionGrid, Polarization};
use crate::linalg::{cabs, conj, hermitize, log10_det_hermitian};
use crate::special::cis;
use crate::spherical_modes::{far_field_theta_part, LegendreTable, ModeSet, TangentField};
use crate::{c64, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Theta,
    Phi,
}

/// Far-field functions of a mode set tabulated on a direction grid, using the
/// separation `K_j(θ, φ) = k_j(θ) e^{i m_j φ}`.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    pub modes: ModeSet,
    pub grid: DirectionGrid,
    /// `k_j(θ_t)` θ components, indexed `[j * n_theta + t]`.
    kt: Vec<c64>,
    /// `k_j(θ_t)` φ components.
    kp: Vec<c64>,
    m: Vec<i32>,
    /// `e^{i k φ_p}` for `k = -2N ..= 2N`, indexed `[(k + 2N) * n_phi + p]`.
    eik: Vec<c64>,
    /// Flat indices of modes grouped by azimuthal order, `m = -N ..= N`.
    by_m: Vec<Vec<usize>>,
}

impl ModeBasis {
    pub fn new(modes: ModeSet, grid: DirectionGrid) -> Self {
        let nt = grid.n_theta();
        let np = grid.n_phi();
        let j_count = modes.mode_count();
        let n = modes.truncation_order as i32;
        let mut kt = vec![c64::new(0.0, 0.0); j_count * nt];
        let mut kp = kt.clone();
        for t in 0..nt {
            let leg = LegendreTable::new(modes.truncation_order, grid.cos_theta[t]);
            for (j, &idx) in modes.modes().iter().enumerate() {
                let f = far_field_theta_part(idx, &leg);
                kt[j * nt + t] = f.theta;
                kp[j * nt + t] = f.phi;
            }
        }
        let m: Vec<i32> = modes.modes().iter().map(|i| i.m).collect();
        let mut eik = Vec::with_capacity((4 * n as usize + 1) * np);
        for k in -2 * n..=2 * n {
            for p in 0..np {
                eik.push(cis(k as f64 * grid.phi[p]));
            }
        }
        let mut by_m = vec![Vec::new(); 2 * n as usize + 1];
        for (j, &mm) in m.iter().enumerate() {
            by_m[(mm + n) as usize].push(j);
        }
        Self { modes, grid, kt, kp, m, eik, by_m }
    }

    pub fn mode_count(&self) -> usize {
        self.m.len()
    }

    /// `K_j` at grid node `node`.
    pub fn far_field(&self, j: usize, node: usize) -> TangentField {
        let nt = self.grid.n_theta();
        let np = self.grid.n_phi();
        let (t, p) = (node / np, node % np);
        let e = self.e(self.m[j], p);
        TangentField { theta: self.kt[j * nt + t] * e, phi: self.kp[j * nt + t] * e }
    }

    #[inline]
    fn e(&self, k: i32, p: usize) -> c64 {
        let n = self.modes.truncation_order as i32;
        self.eik[(k + 2 * n) as usize * self.grid.n_phi() + p]
    }

    /// One field component of every pattern in `q`, shape streams × nodes.
    pub fn field(&self, q: &Mat<c64>, comp: Component) -> Result<Mat<c64>> {
        if q.nrows() != self.mode_count() {
            return Err(Error::Dimension("SMC rows do not match the mode count"));
        }
        let nt = self.grid.n_theta();
        let np = self.grid.n_phi();
        let n = self.modes.truncation_order as i32;
        let k = match comp {
            Component::Theta => &self.kt,
            Component::Phi => &self.kp,
        };
        let streams = q.ncols();
        let mut out = Mat::<c64>::zeros(streams, nt * np);
        let mut coef = vec![c64::new(0.0, 0.0); 2 * n as usize + 1];
        for s in 0..streams {
            for t in 0..nt {
                for (mi, js) in self.by_m.iter().enumerate() {
                    let mut acc = c64::new(0.0, 0.0);
                    for &j in js {
                        acc += k[j * nt + t] * q[(j, s)];
                    }
                    coef[mi] = acc;
                }
                for p in 0..np {
                    let mut acc = c64::new(0.0, 0.0);
                    for (mi, c) in coef.iter().enumerate() {
                        if c.re != 0.0 || c.im != 0.0 {
                            acc += *c * self.e(mi as i32 - n, p);
                        }
                    }
                    out[(s, t * np + p)] = acc;
                }
            }
        }
        Ok(out)
    }

    /// Summed pattern power `Σ_m |g_m|²` over the polarization components that
    /// couple to the channel.
    pub fn power(&self, q: &Mat<c64>, pol: Polarization) -> Result<Vec<f64>> {
        let mut out = column_power(&self.field(q, Component::Theta)?);
        if pol == Polarization::Both {
            for (o, v) in out.iter_mut().zip(column_power(&self.field(q, Component::Phi)?)) {
                *o += v;
            }
        }
        Ok(out)
    }

    /// `Σ_j |k_j|²` at each node: the coupled power of all modes at once.
    pub fn total_mode_power(&self, pol: Polarization) -> Vec<f64> {
        let nt = self.grid.n_theta();
        let np = self.grid.n_phi();
        let mut row = vec![0.0; nt];
        for j in 0..self.mode_count() {
            for (t, r) in row.iter_mut().enumerate() {
                *r += self.kt[j * nt + t].norm_sqr();
                if pol == Polarization::Both {
                    *r += self.kp[j * nt + t].norm_sqr();
                }
            }
        }
        (0..nt * np).map(|k| row[k / np]).collect()
    }

    /// Mode-space correlation `R_sph` for a marginal profile sampled on the grid.
    ///
    /// The azimuthal sum is done once per θ row as a Fourier coefficient of the
    /// marginal, `F_t(k) = Σ_p w_φ P(θ_t, φ_p) e^{ikφ_p}`, so that
    /// `R[i, j] = Σ_t w_t k_i(θ_t) k_j(θ_t)* F_t(m_i - m_j)`.
    pub fn mode_correlation(&self, marginal: &[f64], pol: Polarization) -> Result<Mat<c64>> {
        let nt = self.grid.n_theta();
        let np = self.grid.n_phi();
        if marginal.len() != nt * np {
            return Err(Error::Dimension("marginal does not match the grid"));
        }
        if let Some(k) = marginal.iter().position(|&v| v < 0.0 || v.is_nan()) {
            return Err(Error::NegativeMarginal(k));
        }
        let n = self.modes.truncation_order as i32;
        let nk = 4 * n as usize + 1;
        let jc = self.mode_count();
        let mut r = Mat::<c64>::zeros(jc, jc);
        let mut f = vec![c64::new(0.0, 0.0); nk];
        let mut a = vec![c64::new(0.0, 0.0); jc];
        let mut b = vec![c64::new(0.0, 0.0); jc];
        for t in 0..nt {
            let row = &marginal[t * np..(t + 1) * np];
            if row.iter().all(|&v| v == 0.0) {
                continue;
            }
            for (ki, fk) in f.iter_mut().enumerate() {
                let k = ki as i32 - 2 * n;
                let mut acc = c64::new(0.0, 0.0);
                for (p, &v) in row.iter().enumerate() {
                    if v != 0.0 {
                        acc += self.e(k, p) * v;
                    }
                }
                *fk = acc * self.grid.phi_weight;
            }
            let wt = self.grid.theta_weights[t];
            let comps: &[&Vec<c64>] = match pol {
                Polarization::Theta => &[&self.kt],
                Polarization::Both => &[&self.kt, &self.kp],
            };
            for kv in comps {
                for j in 0..jc {
                    a[j] = kv[j * nt + t] * wt;
                    b[j] = kv[j * nt + t].conj();
                }
                for j in 0..jc {
                    let bj = b[j];
                    let mj = self.m[j];
                    for i in 0..=j {
                        let d = (self.m[i] - mj + 2 * n) as usize;
                        r[(i, j)] += a[i] * bj * f[d];
                    }
                }
            }
        }
        for j in 0..jc {
            for i in 0..j {
                r[(j, i)] = r[(i, j)].conj();
            }
            r[(j, j)] = c64::new(r[(j, j)].re, 0.0);
        }
        Ok(r)
    }

    /// Beam-space correlation of the patterns in `q` computed directly in
    /// pattern space against a marginal.
    pub fn beam_correlation_direct(&self, q: &Mat<c64>, marginal: &[f64], pol: Polarization) -> Result<Mat<c64>> {
        let w = self.grid.weights();
        let mut comps = vec![self.field(q, Component::Theta)?];
        if pol == Polarization::Both {
            comps.push(self.field(q, Component::Phi)?);
        }
        let m = q.ncols();
        let mut r = Mat::<c64>::zeros(m, m);
        for g in &comps {
            for k in 0..w.len() {
                let s = w[k] * marginal[k];
                if s == 0.0 {
                    continue;
                }
                for a in 0..m {
                    let ga = g[(a, k)] * s;
                    for b in 0..m {
                        r[(a, b)] += ga * g[(b, k)].conj();
                    }
                }
            }
        }
        Ok(hermitize(&r))
    }
}

fn column_power(f: &Mat<c64>) -> Vec<f64> {
    let mut out = vec![0.0; f.ncols()];
    for k in 0..f.ncols() {
        for s in 0..f.nrows() {
            out[k] += f[(s, k)].norm_sqr();
        }
    }
    out
}

/// Beam-space correlation `Qᵀ R_sph Q*`.
pub fn beam_correlation(q: &Mat<c64>, r_sph: &Mat<c64>) -> Result<Mat<c64>> {
    if q.nrows() != r_sph.nrows() || r_sph.nrows() != r_sph.ncols() {
        return Err(Error::Dimension("SMC matrix does not match the correlation matrix"));
    }
    Ok(hermitize(&(q.transpose() * r_sph * conj(q))))
}

/// Normalized correlation magnitudes `|r_ij| / sqrt(|r_ii| |r_jj|)`.
pub fn normalize_correlation(r: &Mat<c64>) -> Result<Mat<f64>> {
    let n = r.nrows();
    let d: Vec<f64> = (0..n).map(|i| cabs(r[(i, i)])).collect();
    if let Some(i) = d.iter().position(|&v| v == 0.0) {
        return Err(Error::ZeroDiagonal(i));
    }
    Ok(Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { cabs(r[(i, j)]) / libm::sqrt(d[i] * d[j]) }))
}

/// `10 log10 det R`; `-∞` for a singular matrix.
pub fn det_db(r: &Mat<c64>) -> Result<f64> {
    Ok(10.0 * log10_det_hermitian(r)?)
}

/// Largest off-diagonal entry of a normalized correlation matrix.
pub fn max_off_diagonal(rn: &Mat<f64>) -> f64 {
    let mut v: f64 = 0.0;
    for i in 0..rn.nrows() {
        for j in 0..rn.ncols() {
            if i != j {
                v = v.max(rn[(i, j)]);
            }
        }
    }
    v
}

/// Received power of a single pattern pair, `∫∫ P |g_BS|² |g_UE|²`.
pub fn siso_power(power_bs: &[f64], marginal_bs: &[f64], grid_bs: &DirectionGrid) -> f64 {
    (0..grid_bs.len()).map(|k| power_bs[k] * marginal_bs[k] * grid_bs.weight(k)).sum()
}

/// Transmit-to-noise power ratio `P / P_n` that makes a reference SISO link
/// with received power `reference_power` (unit-power patterns) see `snr_db`.
pub fn calibrated_snr(reference_power: f64, snr_db: f64) -> f64 {
    libm::pow(10.0, snr_db / 10.0) / reference_power
}
