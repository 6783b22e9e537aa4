//! Vector spherical modes: indexing, far-field pattern functions and regular
//! (standing-wave) spherical wave functions in Hansen's normalization.
//!
//! Mode `(s, m, n)` has flat index `j = 2(n(n+1) + m - 1) + s` (1-based), with
//! `s = 1` for TE and `s = 2` for TM modes. Vectors of coefficients are stored
//! in flat-index order, zero-based.

use alloc::vec;
use alloc::vec::Vec;

use crate::special::{cis, spherical_jn};
use crate::{c64, Error, Result, K0};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeIndex {
    pub s: u8,
    pub m: i32,
    pub n: u32,
}

impl ModeIndex {
    pub fn new(s: u8, m: i32, n: u32) -> Result<Self> {
        if !(s == 1 || s == 2) || n == 0 || m.unsigned_abs() > n {
            return Err(Error::InvalidMode { s, m, n });
        }
        Ok(Self { s, m, n })
    }

    /// 1-based flat index.
    pub fn flat(&self) -> usize {
        let n = self.n as i64;
        (2 * (n * (n + 1) + self.m as i64 - 1) + self.s as i64) as usize
    }

    /// Inverse of [`ModeIndex::flat`].
    pub fn from_flat(j: usize) -> Result<Self> {
        if j == 0 {
            return Err(Error::OutOfRange("flat mode index starts at 1"));
        }
        let s = if j % 2 == 1 { 1 } else { 2 };
        let t = (j - s as usize) / 2 + 1; // n(n+1) + m
        let mut n = libm::sqrt(t as f64) as u32;
        while (n as usize + 1) * (n as usize + 1) <= t {
            n += 1;
        }
        while (n as usize) * (n as usize) > t {
            n -= 1;
        }
        let m = t as i64 - (n as i64) * (n as i64 + 1);
        Self::new(s, m as i32, n)
    }
}

/// Truncation order for an enclosing sphere of radius `r0` wavelengths:
/// `floor(2π r0)` with zero margin.
pub fn truncation_order(r0: f64) -> u32 {
    libm::floor(K0 * r0) as u32
}

/// `J = 2 N (N + 2)`.
pub fn mode_count(n_tr: u32) -> usize {
    2 * n_tr as usize * (n_tr as usize + 2)
}

pub fn mode_count_for_radius(r0: f64) -> usize {
    mode_count(truncation_order(r0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    pub truncation_order: u32,
    /// Enclosing radius in wavelengths, when the set was derived from one.
    pub enclosing_radius: Option<f64>,
    modes: Vec<ModeIndex>,
}

impl ModeSet {
    pub fn new(truncation_order: u32) -> Self {
        let mut modes = Vec::with_capacity(mode_count(truncation_order));
        for n in 1..=truncation_order {
            for m in -(n as i32)..=(n as i32) {
                for s in 1..=2 {
                    modes.push(ModeIndex { s, m, n });
                }
            }
        }
        Self { truncation_order, enclosing_radius: None, modes }
    }

    pub fn for_radius(r0: f64) -> Self {
        let mut set = Self::new(truncation_order(r0));
        set.enclosing_radius = Some(r0);
        set
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[ModeIndex] {
        &self.modes
    }

    /// Zero-based position of the `(s=2, m=0, n=1)` dipole mode.
    pub fn omni_index(&self) -> usize {
        ModeIndex { s: 2, m: 0, n: 1 }.flat() - 1
    }
}

/// A vector field transverse to the radial direction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TangentField {
    pub theta: c64,
    pub phi: c64,
}

/// Normalized associated Legendre data at one `cos θ` for all `n ≤ N`, `0 ≤ m ≤ n`.
///
/// `P̄_n^m` is normalized so that `∫ (P̄_n^m)² d(cos θ) = 1`.
#[derive(Debug, Clone)]
pub struct LegendreTable {
    nmax: u32,
    p: Vec<f64>,
    /// `m P̄ / sin θ` for `m ≥ 0`.
    mps: Vec<f64>,
    /// `dP̄/dθ`.
    dp: Vec<f64>,
}

impl LegendreTable {
    #[inline]
    fn idx(n: u32, m: u32) -> usize {
        (n * (n + 1) / 2 + m) as usize
    }

    /// Forward recursion in `n` on the reduced functions `P̄/sin^m θ`, which stays
    /// finite at the poles.
    pub fn new(nmax: u32, x: f64) -> Self {
        let len = Self::idx(nmax, nmax) + 1;
        let mut p = vec![0.0; len];
        let mut mps = vec![0.0; len];
        let mut dp = vec![0.0; len];
        let st = libm::sqrt((1.0 - x * x).max(0.0));
        let nmx = nmax as usize;
        let mut pt = vec![0.0; nmx + 1];
        let mut dpt = vec![0.0; nmx + 1];
        let mut cmm = libm::sqrt(0.5);
        for m in 0..=nmx {
            if m > 0 {
                cmm *= libm::sqrt((2 * m + 1) as f64 / (2 * m) as f64);
            }
            pt[m] = cmm;
            dpt[m] = 0.0;
            if m < nmx {
                let a = libm::sqrt((2 * m + 3) as f64);
                pt[m + 1] = a * x * pt[m];
                dpt[m + 1] = a * pt[m];
            }
            for n in m + 2..=nmx {
                let a = coef(n, m);
                let ap = coef(n - 1, m);
                pt[n] = a * (x * pt[n - 1] - pt[n - 2] / ap);
                dpt[n] = a * (pt[n - 1] + x * dpt[n - 1] - dpt[n - 2] / ap);
            }
            let sm1 = if m == 0 { 0.0 } else { libm::pow(st, (m - 1) as f64) };
            for n in m.max(1)..=nmx {
                let k = Self::idx(n as u32, m as u32);
                if m == 0 {
                    p[k] = pt[n];
                    mps[k] = 0.0;
                    dp[k] = -st * dpt[n];
                } else {
                    p[k] = sm1 * st * pt[n];
                    mps[k] = m as f64 * sm1 * pt[n];
                    dp[k] = sm1 * (m as f64 * x * pt[n] - st * st * dpt[n]);
                }
            }
        }
        Self { nmax, p, mps, dp }
    }

    pub fn nmax(&self) -> u32 {
        self.nmax
    }

    /// `(P̄, m P̄ / sin θ, dP̄/dθ)` for `m ≥ 0`.
    #[inline]
    pub fn get(&self, n: u32, m: u32) -> (f64, f64, f64) {
        let k = Self::idx(n, m);
        (self.p[k], self.mps[k], self.dp[k])
    }
}

#[inline]
fn coef(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    libm::sqrt((4.0 * n * n - 1.0) / (n * n - m * m))
}

/// `(-m/|m|)^m`, taken as 1 for `m ≤ 0`.
#[inline]
fn sigma_m(m: i32) -> f64 {
    if m > 0 && m % 2 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// `(-i)^p`.
#[inline]
fn neg_i_pow(p: u32) -> c64 {
    match p % 4 {
        0 => c64::new(1.0, 0.0),
        1 => c64::new(0.0, -1.0),
        2 => c64::new(-1.0, 0.0),
        _ => c64::new(0.0, 1.0),
    }
}

/// θ-dependent part of the far-field function, i.e. `K_j(θ, φ) e^{-imφ}`.
#[inline]
pub fn far_field_theta_part(idx: ModeIndex, leg: &LegendreTable) -> TangentField {
    let n = idx.n;
    let m = idx.m;
    let (_, mps, dp) = leg.get(n, m.unsigned_abs());
    let mps = if m < 0 { -mps } else { mps };
    let c = libm::sqrt(2.0 / (n * (n + 1)) as f64) * sigma_m(m);
    let i = c64::new(0.0, 1.0);
    if idx.s == 1 {
        let f = neg_i_pow(n + 1) * c;
        TangentField { theta: f * i * mps, phi: f * (-dp) }
    } else {
        let f = neg_i_pow(n) * c;
        TangentField { theta: f * dp, phi: f * i * mps }
    }
}

/// Far-field pattern function `K_smn(θ, φ)`.
pub fn far_field_function(idx: ModeIndex, theta: f64, phi: f64) -> Result<TangentField> {
    let idx = ModeIndex::new(idx.s, idx.m, idx.n)?;
    let leg = LegendreTable::new(idx.n, libm::cos(theta));
    let t = far_field_theta_part(idx, &leg);
    let e = cis(idx.m as f64 * phi);
    Ok(TangentField { theta: t.theta * e, phi: t.phi * e })
}

/// Far-field functions of every mode in `set` at one direction, in flat order.
pub fn far_field_all(set: &ModeSet, theta: f64, phi: f64) -> Vec<TangentField> {
    let leg = LegendreTable::new(set.truncation_order, libm::cos(theta));
    set.modes()
        .iter()
        .map(|&idx| {
            let t = far_field_theta_part(idx, &leg);
            let e = cis(idx.m as f64 * phi);
            TangentField { theta: t.theta * e, phi: t.phi * e }
        })
        .collect()
}

/// Spherical vector components `(r, θ, φ)`.
pub type SphericalVector = [c64; 3];

/// Regular spherical wave function `F_smn` (radial dependence `j_n(kr)`) at the
/// point `(r, θ, φ)`, in spherical components.
pub fn regular_wave_function(idx: ModeIndex, r: f64, theta: f64, phi: f64) -> Result<SphericalVector> {
    let idx = ModeIndex::new(idx.s, idx.m, idx.n)?;
    let leg = LegendreTable::new(idx.n, libm::cos(theta));
    let jn = spherical_jn(idx.n as usize, K0 * r);
    Ok(regular_from_tables(idx, &leg, &jn, K0 * r, phi))
}

/// Same as [`regular_wave_function`] with the Legendre and Bessel tables supplied.
pub fn regular_from_tables(idx: ModeIndex, leg: &LegendreTable, jn: &[f64], kr: f64, phi: f64) -> SphericalVector {
    let n = idx.n;
    let m = idx.m;
    let (p, mps, dp) = leg.get(n, m.unsigned_abs());
    let mps = if m < 0 { -mps } else { mps };
    let nn1 = (n * (n + 1)) as f64;
    let c = sigma_m(m) / libm::sqrt(2.0 * core::f64::consts::PI) / libm::sqrt(nn1);
    let e = cis(m as f64 * phi) * c;
    let i = c64::new(0.0, 1.0);
    let z = c64::new(0.0, 0.0);
    let j = jn[n as usize];
    if idx.s == 1 {
        [z, e * i * (j * mps), e * (-j * dp)]
    } else {
        let (j_over_x, bracket) = if kr > 0.0 {
            let jx = j / kr;
            (jx, jn[n as usize - 1] - n as f64 * jx)
        } else if n == 1 {
            (1.0 / 3.0, 2.0 / 3.0)
        } else {
            (0.0, 0.0)
        };
        [e * (nn1 * j_over_x * p), e * (bracket * dp), e * i * (bracket * mps)]
    }
}

/// Unit vectors `(r̂, θ̂, φ̂)` in Cartesian components.
pub fn spherical_basis(theta: f64, phi: f64) -> [[f64; 3]; 3] {
    let (st, ct) = libm::sincos(theta);
    let (sp, cp) = libm::sincos(phi);
    [[st * cp, st * sp, ct], [ct * cp, ct * sp, -st], [-sp, cp, 0.0]]
}

/// Spherical coordinates `(r, θ, φ)` of a Cartesian point; the origin maps to
/// `θ = 0, φ = 0`.
pub fn to_spherical(p: [f64; 3]) -> (f64, f64, f64) {
    let r = libm::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
    if r == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let theta = libm::acos((p[2] / r).clamp(-1.0, 1.0));
    let phi = libm::atan2(p[1], p[0]);
    (r, theta, phi)
}
