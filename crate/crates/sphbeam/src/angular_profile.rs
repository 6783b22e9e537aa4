//! Joint angular power profile, quadrature grids on the sphere and marginal
//! profiles.
//!
//! The joint profile is a 4-D Gaussian over `(θ_BS, φ_BS, θ_UE, φ_UE)`. It is a
//! density in the flat angle coordinates; the `sin θ` Jacobian lives in the grid
//! weights. Azimuths are folded with one image on each side.

use alloc::vec;
use alloc::vec::Vec;

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, Side};

use crate::special::gauss_legendre;
use crate::{Error, Result};

const DEG: f64 = core::f64::consts::PI / 180.0;
const TWO_PI: f64 = 2.0 * core::f64::consts::PI;

/// Quadratic-form cutoff used to prune kernel entries; `exp(-30)` relative to
/// the peak is dropped.
pub const PRUNE_THRESHOLD: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Polarization {
    /// Only the θ component of patterns couples to the channel.
    #[default]
    Theta,
    /// Both tangential components couple.
    Both,
}

/// Gaussian profile parameters; angles in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileParams {
    pub mean_bs: [f64; 2],
    pub mean_ue: [f64; 2],
    /// `(σ_BS,θ, σ_BS,φ, σ_UE,θ, σ_UE,φ)`.
    pub sigma: [f64; 4],
    /// Correlation matrix in the order `(θ_BS, φ_BS, θ_UE, φ_UE)`.
    pub corr: [[f64; 4]; 4],
    pub polarization: Polarization,
}

impl Default for ProfileParams {
    fn default() -> Self {
        Self {
            mean_bs: [90.0, 0.0],
            mean_ue: [90.0, 0.0],
            sigma: [4.0, 21.0, 11.0, 48.0],
            corr: [[1.0, 0.3, 0.0, 0.2], [0.3, 1.0, 0.1, 0.4], [0.0, 0.1, 1.0, 0.0], [0.2, 0.4, 0.0, 1.0]],
            polarization: Polarization::Theta,
        }
    }
}

impl ProfileParams {
    pub fn validate(&self) -> Result<()> {
        if self.sigma.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter("profile sigmas must be positive"));
        }
        for i in 0..4 {
            if (self.corr[i][i] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter("correlation matrix must have unit diagonal"));
            }
            for j in 0..4 {
                if (self.corr[i][j] - self.corr[j][i]).abs() > 1e-12 {
                    return Err(Error::InvalidParameter("correlation matrix must be symmetric"));
                }
            }
        }
        let c = Mat::<f64>::from_fn(4, 4, |i, j| self.corr[i][j]);
        c.llt(Side::Lower).map_err(|_| Error::NotPositiveDefinite)?;
        Ok(())
    }

    /// Parameters with the BS and UE roles exchanged.
    pub fn swapped(&self) -> Self {
        let perm = [2, 3, 0, 1];
        let mut corr = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                corr[i][j] = self.corr[perm[i]][perm[j]];
            }
        }
        Self {
            mean_bs: self.mean_ue,
            mean_ue: self.mean_bs,
            sigma: [self.sigma[2], self.sigma[3], self.sigma[0], self.sigma[1]],
            corr,
            polarization: self.polarization,
        }
    }
}

/// Gauss-Legendre nodes in `cos θ` times uniform nodes in `φ`.
///
/// Nodes are ordered row-major with θ ascending, then φ ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionGrid {
    pub theta: Vec<f64>,
    pub cos_theta: Vec<f64>,
    pub theta_weights: Vec<f64>,
    pub phi: Vec<f64>,
    pub phi_weight: f64,
}

impl DirectionGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta < 2 || n_phi < 2 {
            return Err(Error::InvalidParameter("grid needs at least 2 nodes per axis"));
        }
        let (x, w) = gauss_legendre(n_theta);
        // ascending θ means descending cos θ
        let cos_theta: Vec<f64> = x.iter().rev().copied().collect();
        let theta_weights: Vec<f64> = w.iter().rev().copied().collect();
        let theta = cos_theta.iter().map(|&c| libm::acos(c)).collect();
        let phi = (0..n_phi).map(|k| TWO_PI * k as f64 / n_phi as f64).collect();
        Ok(Self { theta, cos_theta, theta_weights, phi, phi_weight: TWO_PI / n_phi as f64 })
    }

    pub fn n_theta(&self) -> usize {
        self.theta.len()
    }

    pub fn n_phi(&self) -> usize {
        self.phi.len()
    }

    pub fn len(&self) -> usize {
        self.theta.len() * self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(θ, φ)` of node `k`.
    pub fn node(&self, k: usize) -> (f64, f64) {
        (self.theta[k / self.n_phi()], self.phi[k % self.n_phi()])
    }

    /// Quadrature weight of node `k`, including the `sin θ` Jacobian.
    pub fn weight(&self, k: usize) -> f64 {
        self.theta_weights[k / self.n_phi()] * self.phi_weight
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.weight(k)).collect()
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().enumerate().map(|(k, v)| v * self.weight(k)).sum()
    }
}

/// The normalized joint angular profile.
#[derive(Debug, Clone)]
pub struct JointProfile {
    pub params: ProfileParams,
    mean: [f64; 4],
    /// Inverse covariance.
    a: [[f64; 4]; 4],
    /// Inverse of the BS 2×2 covariance block.
    a_bs: [[f64; 2]; 2],
    /// Inverse of the UE 2×2 covariance block.
    a_ue: [[f64; 2]; 2],
    prefactor: f64,
    /// Integral of the unnormalized density over both spheres.
    pub total_power: f64,
}

impl JointProfile {
    pub fn new(params: ProfileParams) -> Result<Self> {
        params.validate()?;
        let s = [params.sigma[0] * DEG, params.sigma[1] * DEG, params.sigma[2] * DEG, params.sigma[3] * DEG];
        let cov = Mat::<f64>::from_fn(4, 4, |i, j| s[i] * params.corr[i][j] * s[j]);
        let llt = cov.llt(Side::Lower).map_err(|_| Error::NotPositiveDefinite)?;
        let l: f64 = (0..4).map(|i| llt.L()[(i, i)]).product();
        let det = l * l;
        let inv = llt.inverse();
        let mut a = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                a[i][j] = 0.5 * (inv[(i, j)] + inv[(j, i)]);
            }
        }
        let inv2 = |i: usize, j: usize| -> [[f64; 2]; 2] {
            let (p, q, r) = (cov[(i, i)], cov[(i, j)], cov[(j, j)]);
            let d = p * r - q * q;
            [[r / d, -q / d], [-q / d, p / d]]
        };
        let mean = [params.mean_bs[0] * DEG, params.mean_bs[1] * DEG, params.mean_ue[0] * DEG, params.mean_ue[1] * DEG];
        let peak = 1.0 / (TWO_PI * TWO_PI * libm::sqrt(det));
        let total = theta_marginal_mass(&cov, mean[0], mean[2]);
        Ok(Self { a_bs: inv2(0, 1), a_ue: inv2(2, 3), params, mean, a, prefactor: peak / total, total_power: total })
    }

    /// Density at `(θ_BS, φ_BS)`, `(θ_UE, φ_UE)` in radians.
    pub fn joint_density(&self, bs: (f64, f64), ue: (f64, f64)) -> f64 {
        let mut acc = 0.0;
        for kb in -1..=1 {
            for ku in -1..=1 {
                let x = [
                    bs.0 - self.mean[0],
                    bs.1 - self.mean[1] + TWO_PI * kb as f64,
                    ue.0 - self.mean[2],
                    ue.1 - self.mean[3] + TWO_PI * ku as f64,
                ];
                acc += libm::exp(-0.5 * quad4(&self.a, &x));
            }
        }
        acc * self.prefactor
    }

    /// `P_BS(ψ_BS) = ∫ P(ψ_BS, ψ_UE) power_ue(ψ_UE) dψ_UE`, evaluated node by
    /// node without pruning.
    pub fn marginal_bs_direct(&self, grid_bs: &DirectionGrid, grid_ue: &DirectionGrid, power_ue: &[f64]) -> Result<Vec<f64>> {
        if power_ue.len() != grid_ue.len() {
            return Err(Error::Dimension("UE power does not match the UE grid"));
        }
        let wu = grid_ue.weights();
        Ok((0..grid_bs.len())
            .map(|b| {
                let pb = grid_bs.node(b);
                (0..grid_ue.len()).map(|u| self.joint_density(pb, grid_ue.node(u)) * power_ue[u] * wu[u]).sum()
            })
            .collect())
    }

    /// `P_UE(ψ_UE) = ∫ P(ψ_BS, ψ_UE) power_bs(ψ_BS) dψ_BS`, evaluated node by
    /// node without pruning.
    pub fn marginal_ue_direct(&self, grid_bs: &DirectionGrid, grid_ue: &DirectionGrid, power_bs: &[f64]) -> Result<Vec<f64>> {
        if power_bs.len() != grid_bs.len() {
            return Err(Error::Dimension("BS power does not match the BS grid"));
        }
        let wb = grid_bs.weights();
        Ok((0..grid_ue.len())
            .map(|u| {
                let pu = grid_ue.node(u);
                (0..grid_bs.len()).map(|b| self.joint_density(grid_bs.node(b), pu) * power_bs[b] * wb[b]).sum()
            })
            .collect())
    }
}

#[inline]
fn quad4(a: &[[f64; 4]; 4], x: &[f64; 4]) -> f64 {
    let mut q = 0.0;
    for i in 0..4 {
        let mut r = 0.0;
        for j in 0..4 {
            r += a[i][j] * x[j];
        }
        q += x[i] * r;
    }
    q
}

#[inline]
fn quad2(a: &[[f64; 2]; 2], x: [f64; 2]) -> f64 {
    a[0][0] * x[0] * x[0] + 2.0 * a[0][1] * x[0] * x[1] + a[1][1] * x[1] * x[1]
}

/// Mass of the unnormalized 4-D Gaussian over both spheres. The azimuths
/// integrate out exactly, leaving the 2-D θ marginal against `sin θ_BS sin θ_UE`
/// on `[0, π]²`, done by composite Gauss-Legendre.
fn theta_marginal_mass(cov: &Mat<f64>, mu_b: f64, mu_u: f64) -> f64 {
    let (p, q, r) = (cov[(0, 0)], cov[(0, 2)], cov[(2, 2)]);
    let det = p * r - q * q;
    let (a11, a12, a22) = (r / det, -q / det, p / det);
    let (x, w) = gauss_legendre(16);
    let panels = 64;
    let h = core::f64::consts::PI / panels as f64;
    let mut t = Vec::with_capacity(panels * 16);
    let mut ws = Vec::with_capacity(panels * 16);
    for k in 0..panels {
        let a = k as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            let ti = a + 0.5 * h * (xi + 1.0);
            t.push(ti);
            ws.push(0.5 * h * wi * libm::sin(ti));
        }
    }
    let mut acc = 0.0;
    for (i, &tb) in t.iter().enumerate() {
        let d1 = tb - mu_b;
        let mut row = 0.0;
        for (j, &tu) in t.iter().enumerate() {
            let d2 = tu - mu_u;
            row += ws[j] * libm::exp(-0.5 * (a11 * d1 * d1 + 2.0 * a12 * d1 * d2 + a22 * d2 * d2));
        }
        acc += ws[i] * row;
    }
    acc / (TWO_PI * libm::sqrt(det))
}

/// The joint profile sampled on a BS grid × UE grid product, with quadrature-
/// negligible entries pruned. Only BS nodes with a non-negligible contribution
/// are stored, each as a dense row over all UE nodes.
#[derive(Debug, Clone)]
pub struct ProfileKernel {
    pub grid_bs: DirectionGrid,
    pub grid_ue: DirectionGrid,
    rows: Vec<usize>,
    values: Vec<f64>,
    w_bs: Vec<f64>,
    w_ue: Vec<f64>,
}

impl ProfileKernel {
    pub fn new(profile: &JointProfile, grid_bs: DirectionGrid, grid_ue: DirectionGrid) -> Self {
        let nu = grid_ue.len();
        let m = profile.mean;
        // UE image coordinates and their own quadratic form / bound
        let mut ue_images: Vec<(Vec<usize>, Vec<[f64; 2]>)> = Vec::new();
        for ku in -1..=1 {
            let mut idx = Vec::new();
            let mut xs = Vec::new();
            for u in 0..nu {
                let (t, p) = grid_ue.node(u);
                let x = [t - m[2], p - m[3] + TWO_PI * ku as f64];
                if quad2(&profile.a_ue, x) < PRUNE_THRESHOLD {
                    idx.push(u);
                    xs.push(x);
                }
            }
            ue_images.push((idx, xs));
        }
        let mut active = vec![false; grid_bs.len()];
        let mut bs_images: Vec<Vec<(usize, [f64; 2])>> = Vec::new();
        for kb in -1..=1 {
            let mut v = Vec::new();
            for b in 0..grid_bs.len() {
                let (t, p) = grid_bs.node(b);
                let x = [t - m[0], p - m[1] + TWO_PI * kb as f64];
                if quad2(&profile.a_bs, x) < PRUNE_THRESHOLD {
                    active[b] = true;
                    v.push((b, x));
                }
            }
            bs_images.push(v);
        }
        let rows: Vec<usize> = (0..grid_bs.len()).filter(|&b| active[b]).collect();
        let mut slot = vec![usize::MAX; grid_bs.len()];
        for (r, &b) in rows.iter().enumerate() {
            slot[b] = r;
        }
        let mut values = vec![0.0; rows.len() * nu];
        let a = &profile.a;
        for img in &bs_images {
            for &(b, xb) in img {
                let row = &mut values[slot[b] * nu..(slot[b] + 1) * nu];
                let qb = a[0][0] * xb[0] * xb[0] + 2.0 * a[0][1] * xb[0] * xb[1] + a[1][1] * xb[1] * xb[1];
                let v0 = xb[0] * a[0][2] + xb[1] * a[1][2];
                let v1 = xb[0] * a[0][3] + xb[1] * a[1][3];
                for (idx, xs) in &ue_images {
                    for (&u, xu) in idx.iter().zip(xs) {
                        let q = qb
                            + 2.0 * (v0 * xu[0] + v1 * xu[1])
                            + a[2][2] * xu[0] * xu[0]
                            + 2.0 * a[2][3] * xu[0] * xu[1]
                            + a[3][3] * xu[1] * xu[1];
                        if q < 2.0 * PRUNE_THRESHOLD {
                            row[u] += libm::exp(-0.5 * q);
                        }
                    }
                }
            }
        }
        for v in values.iter_mut() {
            *v *= profile.prefactor;
        }
        let w_bs = grid_bs.weights();
        let w_ue = grid_ue.weights();
        Self { grid_bs, grid_ue, rows, values, w_bs, w_ue }
    }

    /// Number of stored BS rows.
    pub fn active_rows(&self) -> usize {
        self.rows.len()
    }

    /// Kernel value at BS node `b`, UE node `u`.
    pub fn value(&self, b: usize, u: usize) -> f64 {
        match self.rows.binary_search(&b) {
            Ok(r) => self.values[r * self.grid_ue.len() + u],
            Err(_) => 0.0,
        }
    }

    /// Marginal profile at the BS given the far-side (UE) pattern power.
    pub fn marginal_bs(&self, power_ue: &[f64]) -> Result<Vec<f64>> {
        let nu = self.grid_ue.len();
        if power_ue.len() != nu {
            return Err(Error::Dimension("UE power does not match the UE grid"));
        }
        let pw: Vec<f64> = power_ue.iter().zip(&self.w_ue).map(|(p, w)| p * w).collect();
        let mut out = vec![0.0; self.grid_bs.len()];
        for (r, &b) in self.rows.iter().enumerate() {
            let row = &self.values[r * nu..(r + 1) * nu];
            out[b] = row.iter().zip(&pw).map(|(k, p)| k * p).sum();
        }
        Ok(out)
    }

    /// Marginal profile at the UE given the far-side (BS) pattern power.
    pub fn marginal_ue(&self, power_bs: &[f64]) -> Result<Vec<f64>> {
        let nu = self.grid_ue.len();
        if power_bs.len() != self.grid_bs.len() {
            return Err(Error::Dimension("BS power does not match the BS grid"));
        }
        let mut out = vec![0.0; nu];
        for (r, &b) in self.rows.iter().enumerate() {
            let s = power_bs[b] * self.w_bs[b];
            if s == 0.0 {
                continue;
            }
            let row = &self.values[r * nu..(r + 1) * nu];
            for (o, k) in out.iter_mut().zip(row) {
                *o += k * s;
            }
        }
        Ok(out)
    }
}
