//! Projection of optimal SMC vectors onto patterns radiatable by tangential
//! currents on a constrained surface.
//!
//! Currents are Dirac deltas at sample points with two tangential directions
//! each. Column `l` of the transfer matrix `Z` holds the SMC vector radiated
//! by unit current element `l`, so `q = Z a` and the realizable subspace is
//! `range(Z)`. The projector `Z Z⁺` is applied through the left singular
//! vectors of `Z`.

use alloc::vec::Vec;

use faer::Mat;

use crate::linalg::{cabs, column_norm};
use crate::special::spherical_jn;
use crate::spherical_modes::{regular_from_tables, spherical_basis, to_spherical, LegendreTable, ModeSet};
use crate::{c64, Error, Result, K0};

/// Relative singular value cutoff of the pseudoinverse.
pub const PINV_TOLERANCE: f64 = 1e-8;

/// Default sample density in points per wavelength along each surface dimension.
pub const DEFAULT_DENSITY: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceKind {
    Plane,
    ThirtySecondSphere,
    Hemisphere,
}

/// A current surface facing `+x` inside the sphere of radius `enclosing_radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AntennaSurface {
    /// Square plate of side `side_length` in the `yz` plane through the origin.
    Plane { side_length: f64, enclosing_radius: f64 },
    /// Part of a sphere of radius `radius` spanning `π/2 ± theta_c` in polar
    /// angle and `± phi_c` in azimuth around `+x`.
    SphereCap { radius: f64, theta_c: f64, phi_c: f64, enclosing_radius: f64 },
}

impl AntennaSurface {
    pub fn new(kind: SurfaceKind, r0: f64) -> Result<Self> {
        if !(r0 > 0.0) {
            return Err(Error::InvalidParameter("enclosing radius must be positive"));
        }
        use core::f64::consts::{FRAC_PI_2, FRAC_PI_8, SQRT_2};
        Ok(match kind {
            SurfaceKind::Plane => AntennaSurface::Plane { side_length: r0 * SQRT_2, enclosing_radius: r0 },
            SurfaceKind::Hemisphere => AntennaSurface::SphereCap { radius: r0, theta_c: FRAC_PI_2, phi_c: FRAC_PI_2, enclosing_radius: r0 },
            SurfaceKind::ThirtySecondSphere => {
                let (tc, pc) = (FRAC_PI_8, FRAC_PI_8);
                let radius = (r0 / (SQRT_2 * libm::sin(tc))).max(r0 / (SQRT_2 * libm::sin(pc)));
                AntennaSurface::SphereCap { radius, theta_c: tc, phi_c: pc, enclosing_radius: r0 }
            }
        })
    }

    pub fn enclosing_radius(&self) -> f64 {
        match *self {
            AntennaSurface::Plane { enclosing_radius, .. } | AntennaSurface::SphereCap { enclosing_radius, .. } => enclosing_radius,
        }
    }
}

/// Current sample points (Cartesian, wavelengths) and two unit tangents each.
#[derive(Debug, Clone)]
pub struct SurfaceSampling {
    pub points: Vec<[f64; 3]>,
    pub tangents: Vec<[[f64; 3]; 2]>,
}

impl SurfaceSampling {
    pub fn point_count(&self) -> usize {
        self.points.len()
    }

    /// Number of current unknowns `L`.
    pub fn unknowns(&self) -> usize {
        2 * self.points.len()
    }
}

/// Samples the surface: a uniform lattice on the plate, bands uniform in polar
/// angle on caps with the azimuthal count per band proportional to its length.
pub fn sample_surface(surface: &AntennaSurface, density: f64) -> Result<SurfaceSampling> {
    if !(density > 0.0) {
        return Err(Error::InvalidParameter("sampling density must be positive"));
    }
    let mut points = Vec::new();
    let mut tangents = Vec::new();
    match *surface {
        AntennaSurface::Plane { side_length, .. } => {
            let n = libm::ceil(side_length * density) as usize;
            let c = |i: usize| (i as f64 + 0.5) / n as f64 * side_length - side_length / 2.0;
            for a in 0..n {
                for b in 0..n {
                    points.push([0.0, c(a), c(b)]);
                    tangents.push([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
                }
            }
        }
        AntennaSurface::SphereCap { radius, theta_c, phi_c, enclosing_radius } => {
            let nb = (libm::round(2.0 * theta_c * radius * density) as usize).max(1);
            for i in 0..nb {
                let th = core::f64::consts::FRAC_PI_2 - theta_c + (i as f64 + 0.5) * 2.0 * theta_c / nb as f64;
                let np = (libm::round(radius * libm::sin(th) * 2.0 * phi_c * density) as usize).max(1);
                for k in 0..np {
                    let ph = -phi_c + (k as f64 + 0.5) / np as f64 * 2.0 * phi_c;
                    let [rh, thh, phh] = spherical_basis(th, ph);
                    points.push([radius * rh[0], radius * rh[1], radius * rh[2]]);
                    tangents.push([thh, phh]);
                }
            }
            // slide the cap back along -x until every point lies inside the enclosing sphere
            let mut x0: f64 = 0.0;
            for p in &points {
                let perp = (enclosing_radius * enclosing_radius - p[1] * p[1] - p[2] * p[2]).max(0.0);
                x0 = x0.max(p[0] - libm::sqrt(perp));
            }
            for p in points.iter_mut() {
                p[0] -= x0;
            }
        }
    }
    Ok(SurfaceSampling { points, tangents })
}

/// Transfer matrix `Z` (J × L): `Z[j, 2p + t] = (-1)^{s+n} conj(F_j(x_p) · t̂_t)`.
///
/// Column `l` is, up to one common constant, the SMC vector of the far field
/// `e^{jk r̂·x}(t̂ − r̂(r̂·t̂))` radiated by a unit current element at `x_p`
/// along `t̂_t`, expanded in the `K_j` of this crate.
pub fn transfer_matrix(sampling: &SurfaceSampling, modes: &ModeSet) -> Mat<c64> {
    let j_count = modes.mode_count();
    let nmax = modes.truncation_order;
    let mut z = Mat::<c64>::zeros(j_count, sampling.unknowns());
    for (p, (&x, tan)) in sampling.points.iter().zip(&sampling.tangents).enumerate() {
        let (r, th, ph) = to_spherical(x);
        let leg = LegendreTable::new(nmax, libm::cos(th));
        let jn = spherical_jn(nmax as usize, K0 * r);
        let basis = spherical_basis(th, ph);
        // tangent directions in local spherical components
        let local: [[f64; 3]; 2] = core::array::from_fn(|t| core::array::from_fn(|c| dot(basis[c], tan[t])));
        for (j, &idx) in modes.modes().iter().enumerate() {
            let f = regular_from_tables(idx, &leg, &jn, K0 * r, ph);
            let parity = if (idx.s as u32 + idx.n).is_multiple_of(2) { 1.0 } else { -1.0 };
            for t in 0..2 {
                let v = f[0] * local[t][0] + f[1] * local[t][1] + f[2] * local[t][2];
                z[(j, 2 * p + t)] = v.conj() * parity;
            }
        }
    }
    z
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `Z` with its truncated SVD, `Z ≈ U_r Σ_r V_rᴴ`.
#[derive(Debug, Clone)]
pub struct ProjectionOperator {
    pub z: Mat<c64>,
    pub u: Mat<c64>,
    pub sigma: Vec<f64>,
    pub v: Mat<c64>,
    /// Singular values of `Z` before truncation, descending.
    pub all_singular_values: Vec<f64>,
}

impl ProjectionOperator {
    pub fn new(z: Mat<c64>) -> Result<Self> {
        Self::with_tolerance(z, PINV_TOLERANCE)
    }

    pub fn with_tolerance(z: Mat<c64>, tol: f64) -> Result<Self> {
        if z.nrows() == 0 || z.ncols() == 0 {
            return Err(Error::ZeroTransfer);
        }
        let svd = z.thin_svd().map_err(|_| Error::Svd)?;
        let s: Vec<f64> = (0..svd.S().dim()).map(|k| svd.S()[k].re).collect();
        let smax = s.first().copied().unwrap_or(0.0);
        if !(smax > 0.0) {
            return Err(Error::ZeroTransfer);
        }
        let r = s.iter().take_while(|&&x| x > tol * smax).count();
        let u = Mat::<c64>::from_fn(z.nrows(), r, |i, k| svd.U()[(i, k)]);
        let v = Mat::<c64>::from_fn(z.ncols(), r, |i, k| svd.V()[(i, k)]);
        Ok(Self { sigma: s[..r].to_vec(), all_singular_values: s, u, v, z })
    }

    pub fn build(sampling: &SurfaceSampling, modes: &ModeSet) -> Result<Self> {
        Self::new(transfer_matrix(sampling, modes))
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `Z⁺ = V_r Σ_r⁻¹ U_rᴴ` (L × J).
    pub fn pinv(&self) -> Mat<c64> {
        let vs = Mat::<c64>::from_fn(self.v.nrows(), self.rank(), |i, k| self.v[(i, k)] / self.sigma[k]);
        vs * self.u.adjoint()
    }

    /// `P = Z Z⁺ = U_r U_rᴴ` (J × J).
    pub fn projector(&self) -> Mat<c64> {
        &self.u * self.u.adjoint()
    }

    /// `q_semi = Z Z⁺ q` and `a = Z⁺ q` for each column of `q`.
    pub fn project(&self, q: &Mat<c64>) -> Result<Projection> {
        if q.nrows() != self.z.nrows() {
            return Err(Error::Dimension("SMC rows do not match the transfer matrix"));
        }
        let c = self.u.adjoint() * q;
        let q_semi = &self.u * &c;
        let cs = Mat::<c64>::from_fn(c.nrows(), c.ncols(), |k, m| c[(k, m)] / self.sigma[k]);
        let currents = &self.v * cs;
        Ok(Projection { q_semi, currents })
    }
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub q_semi: Mat<c64>,
    /// Current coefficients `a` (L × M), two per sample point.
    pub currents: Mat<c64>,
}

impl Projection {
    /// Scales every column of `q_semi` to unit norm, and the currents with it.
    pub fn normalized(&self) -> Projection {
        let mut out = self.clone();
        for m in 0..self.q_semi.ncols() {
            let n = column_norm(&self.q_semi, m);
            if n > 0.0 {
                for i in 0..out.q_semi.nrows() {
                    out.q_semi[(i, m)] /= n;
                }
                for i in 0..out.currents.nrows() {
                    out.currents[(i, m)] /= n;
                }
            }
        }
        out
    }

    /// `‖q − q_semi‖_F` relative to `‖q‖_F`.
    pub fn relative_residual(&self, q: &Mat<c64>) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for m in 0..q.ncols() {
            for i in 0..q.nrows() {
                num += (q[(i, m)] - self.q_semi[(i, m)]).norm_sqr();
                den += q[(i, m)].norm_sqr();
            }
        }
        if den == 0.0 {
            0.0
        } else {
            libm::sqrt(num / den)
        }
    }
}

/// One sampled current element of a stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurrentSample {
    pub position: [f64; 3],
    pub tangents: [[f64; 3]; 2],
    pub amplitude: [c64; 2],
}

/// Per-point currents of stream `m`.
pub fn current_samples(sampling: &SurfaceSampling, currents: &Mat<c64>, m: usize) -> Result<Vec<CurrentSample>> {
    if currents.nrows() != sampling.unknowns() || m >= currents.ncols() {
        return Err(Error::Dimension("currents do not match the sampling"));
    }
    Ok(sampling
        .points
        .iter()
        .zip(&sampling.tangents)
        .enumerate()
        .map(|(p, (&position, &tangents))| CurrentSample {
            position,
            tangents,
            amplitude: [currents[(2 * p, m)], currents[(2 * p + 1, m)]],
        })
        .collect())
}

/// Magnitude of the largest entry, a cheap scale for relative checks.
pub fn max_abs(a: &Mat<c64>) -> f64 {
    let mut v: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            v = v.max(cabs(a[(i, j)]));
        }
    }
    v
}
