//! Alternating eigen-optimization of BS and UE beam patterns.
//!
//! Each half-step fixes the far side's patterns, forms the near side's marginal
//! profile and its mode-space correlation, and takes the top-M eigenvectors.
//! The run starts from the omni UE pattern and stops when the objective
//! `det(R_BS,h / M)` has settled to a relative change below `epsilon` over two
//! consecutive half-steps.

use alloc::vec;
use alloc::vec::Vec;

use faer::Mat;

use crate::angular_profile::{DirectionGrid, JointProfile, Polarization, ProfileKernel};
use crate::correlation::ModeBasis;
use crate::linalg::{hermitian_eigen_desc, hermitian_eigenvalues_desc};
use crate::spherical_modes::ModeSet;
use crate::{c64, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Bs,
    Ue,
}

/// The channel seen through the spherical-mode bases at both ends.
#[derive(Debug, Clone)]
pub struct Link {
    pub kernel: ProfileKernel,
    pub bs: ModeBasis,
    pub ue: ModeBasis,
    pub polarization: Polarization,
}

impl Link {
    pub fn new(profile: &JointProfile, modes_bs: ModeSet, modes_ue: ModeSet, grid_bs: DirectionGrid, grid_ue: DirectionGrid) -> Self {
        let kernel = ProfileKernel::new(profile, grid_bs.clone(), grid_ue.clone());
        Self {
            kernel,
            bs: ModeBasis::new(modes_bs, grid_bs),
            ue: ModeBasis::new(modes_ue, grid_ue),
            polarization: profile.params.polarization,
        }
    }

    pub fn basis(&self, side: Side) -> &ModeBasis {
        match side {
            Side::Bs => &self.bs,
            Side::Ue => &self.ue,
        }
    }

    /// Marginal profile on `side` given the opposite side's patterns.
    pub fn marginal(&self, side: Side, far_q: &Mat<c64>) -> Result<Vec<f64>> {
        match side {
            Side::Bs => self.kernel.marginal_bs(&self.ue.power(far_q, self.polarization)?),
            Side::Ue => self.kernel.marginal_ue(&self.bs.power(far_q, self.polarization)?),
        }
    }

    /// Mode-space correlation on `side` given the opposite side's patterns.
    pub fn mode_correlation(&self, side: Side, far_q: &Mat<c64>) -> Result<Mat<c64>> {
        let marg = self.marginal(side, far_q)?;
        self.basis(side).mode_correlation(&marg, self.polarization)
    }

    /// Beam-space correlation `R_BS,h` of BS patterns `q_bs` with UE patterns `q_ue`.
    pub fn beam_correlation(&self, q_bs: &Mat<c64>, q_ue: &Mat<c64>) -> Result<Mat<c64>> {
        let marg = self.marginal(Side::Bs, q_ue)?;
        self.bs.beam_correlation_direct(q_bs, &marg, self.polarization)
    }

    /// Single-column omni SMC matrix for `side`.
    pub fn omni(&self, side: Side) -> Mat<c64> {
        omni_smc(&self.basis(side).modes)
    }
}

/// The (s=2, m=0, n=1) dipole as a one-column SMC matrix.
pub fn omni_smc(modes: &ModeSet) -> Mat<c64> {
    let mut q = Mat::<c64>::zeros(modes.mode_count(), 1);
    q[(modes.omni_index(), 0)] = c64::new(1.0, 0.0);
    q
}

/// Top-`m` eigenpairs of a mode-space correlation as an SMC matrix. Columns are
/// the conjugated eigenvectors so that `Qᵀ R Q*` is diagonal.
pub fn top_eigen_smc(r: &Mat<c64>, m: usize) -> Result<(Vec<f64>, Mat<c64>)> {
    if m == 0 || m > r.nrows() {
        return Err(Error::TooManyBeams { requested: m, available: r.nrows() });
    }
    let (lam, u) = hermitian_eigen_desc(r)?;
    let q = Mat::<c64>::from_fn(r.nrows(), m, |i, j| u[(i, j)].conj());
    Ok((lam[..m].to_vec(), q))
}

/// `Π λ_k / M` over the given eigenvalues.
pub fn scaled_product(lam: &[f64]) -> f64 {
    let m = lam.len() as f64;
    lam.iter().map(|l| l / m).product()
}

/// Optimal near-side patterns for fixed far-side patterns: the top-`m`
/// eigenvectors of the near side's mode-space correlation.
pub fn optimize_side(link: &Link, side: Side, far_q: &Mat<c64>, m: usize) -> Result<(Vec<f64>, Mat<c64>)> {
    let r = link.mode_correlation(side, far_q)?;
    top_eigen_smc(&r, m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObpbConfig {
    /// Relative allowable change of the objective between half-steps.
    pub epsilon: f64,
    pub max_iterations: usize,
}

impl Default for ObpbConfig {
    fn default() -> Self {
        Self { epsilon: 0.01, max_iterations: 200 }
    }
}

impl ObpbConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter("epsilon must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ObpbState {
    pub q_bs: Mat<c64>,
    pub q_ue: Mat<c64>,
    /// Completed BS half-steps.
    pub iterations: usize,
    /// `det(R_BS,h / M)` after every half-step.
    pub objective_history: Vec<f64>,
    /// Top-M eigenvalues of the final BS mode-space correlation.
    pub eigenvalues_bs: Vec<f64>,
    /// UE half-steps rejected because they would have lowered the objective.
    pub rejected_ue_steps: usize,
    pub converged: bool,
}

impl ObpbState {
    pub fn objective(&self) -> f64 {
        self.objective_history.last().copied().unwrap_or(0.0)
    }
}

fn settled(h: &[f64], eps: f64) -> bool {
    let n = h.len();
    n >= 3 && (h[n - 1] - h[n - 2]).abs() < eps * h[n - 2].abs() && (h[n - 2] - h[n - 3]).abs() < eps * h[n - 3].abs()
}

/// Runs the alternating optimization for `m` streams.
pub fn run(link: &Link, config: &ObpbConfig, m: usize) -> Result<ObpbState> {
    run_with(link, config, m, &mut || false)
}

/// As [`run`], polling `stop` before every iteration; a `true` ends the run
/// unconverged.
pub fn run_with(link: &Link, config: &ObpbConfig, m: usize, stop: &mut dyn FnMut() -> bool) -> Result<ObpbState> {
    config.validate()?;
    let available = link.bs.mode_count().min(link.ue.mode_count());
    if m == 0 || m > available {
        return Err(Error::TooManyBeams { requested: m, available });
    }
    let mut q_ue = link.omni(Side::Ue);
    let mut hist = Vec::new();
    let mut rejected = 0;
    let mut iterations = 0;
    loop {
        let (lam, q_bs) = optimize_side(link, Side::Bs, &q_ue, m)?;
        iterations += 1;
        hist.push(scaled_product(&lam));
        let converged = settled(&hist, config.epsilon);
        if converged || iterations >= config.max_iterations || stop() {
            return Ok(ObpbState {
                q_bs,
                q_ue,
                iterations,
                objective_history: hist,
                eigenvalues_bs: lam,
                rejected_ue_steps: rejected,
                converged,
            });
        }
        let (_, q_new) = optimize_side(link, Side::Ue, &q_bs, m)?;
        let r = link.beam_correlation(&q_bs, &q_new)?;
        let lr = hermitian_eigenvalues_desc(&r)?;
        let obj = scaled_product(&lr);
        let prev = hist[hist.len() - 1];
        // the UE update maximizes its own determinant, which need not raise the BS-side one
        if obj >= prev {
            q_ue = q_new;
            hist.push(obj);
        } else {
            rejected += 1;
            hist.push(prev);
        }
    }
}

/// Upper bound on the objective for `m` streams: the far side is replaced by
/// the envelope `M Σ_j |K_j|²` of every orthonormal `m`-column UE pattern set.
pub fn objective_bound(link: &Link, m: usize) -> Result<f64> {
    let env: Vec<f64> = link.ue.total_mode_power(link.polarization).iter().map(|p| p * m as f64).collect();
    let marg = link.kernel.marginal_bs(&env)?;
    let r = link.bs.mode_correlation(&marg, link.polarization)?;
    let lam = hermitian_eigenvalues_desc(&r)?;
    if m > lam.len() {
        return Err(Error::TooManyBeams { requested: m, available: lam.len() });
    }
    Ok(scaled_product(&lam[..m]))
}

/// Largest subspace angle sine between the column spans of two SMC matrices
/// with orthonormal columns.
pub fn subspace_distance(a: &Mat<c64>, b: &Mat<c64>) -> f64 {
    let p = a.adjoint() * b;
    let sv = p.singular_values().unwrap_or_else(|_| vec![0.0; p.ncols()]);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min).min(1.0);
    libm::sqrt((1.0 - smin * smin).max(0.0))
}
