//! Conventional hybrid beamforming baseline: a rectangular patch array with DFT
//! codebooks, full-array or sub-array connection, and greedy beam selection.
//!
//! Element `(u, v)` sits at row `u` (vertical, `z`) and column `v`
//! (horizontal, `y`) of an array in the `yz` plane facing `+x`; its flat index is
//! `u · N_H + v`. All indices here are zero-based.
//!
//! A beam `d` radiates `g(ψ) = dᵀ a(ψ)` where `a` is the element steering
//! vector, so the beam-space correlation of a weight matrix `W` is
//! `Wᵀ R_elem W*`.

use alloc::vec;
use alloc::vec::Vec;

use faer::Mat;

use crate::angular_profile::{DirectionGrid, ProfileKernel};
use crate::capacity::{rank_adapt, CapacityReport};
use crate::linalg::{hermitize, log10_det_hermitian};
use crate::special::cis;
use crate::spherical_modes::{spherical_basis, TangentField};
use crate::{c64, Error, Result, K0};

/// Peak element gain in dBi.
pub const ELEMENT_PEAK_DBI: f64 = 8.0;
/// Half-power beamwidth in degrees, both planes.
pub const ELEMENT_HPBW_DEG: f64 = 65.0;
/// Maximum attenuation in dB.
pub const ELEMENT_MAX_ATTENUATION_DB: f64 = 30.0;

/// The ten sub-array group shapes `(V, H)` searched by default.
pub const SUBARRAY_CANDIDATES: [(usize, usize); 10] = [(1, 4), (2, 2), (4, 1), (1, 8), (2, 4), (4, 2), (8, 1), (2, 8), (4, 4), (8, 2)];

/// Element gain in dBi, with the element facing `θ = 90°, φ = 0`.
pub fn element_gain_db(theta: f64, phi: f64) -> f64 {
    let th = theta.to_degrees();
    let ph = libm::atan2(libm::sin(phi), libm::cos(phi)).to_degrees();
    let av = -(12.0 * ((th - 90.0) / ELEMENT_HPBW_DEG) * ((th - 90.0) / ELEMENT_HPBW_DEG)).min(ELEMENT_MAX_ATTENUATION_DB);
    let ah = -(12.0 * (ph / ELEMENT_HPBW_DEG) * (ph / ELEMENT_HPBW_DEG)).min(ELEMENT_MAX_ATTENUATION_DB);
    ELEMENT_PEAK_DBI - (-(av + ah)).min(ELEMENT_MAX_ATTENUATION_DB)
}

/// Linear power gain of one element.
pub fn element_gain(theta: f64, phi: f64) -> f64 {
    libm::pow(10.0, element_gain_db(theta, phi) / 10.0)
}

/// θ-polarized element field, `|E_θ|² = G`.
pub fn element_pattern(theta: f64, phi: f64) -> TangentField {
    TangentField { theta: c64::new(libm::sqrt(element_gain(theta, phi)), 0.0), phi: c64::new(0.0, 0.0) }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarArray {
    pub n_v: usize,
    pub n_h: usize,
    /// Element spacing in wavelengths.
    pub spacing: f64,
}

impl PlanarArray {
    pub fn new(n_v: usize, n_h: usize, spacing: f64) -> Result<Self> {
        if n_v == 0 || n_h == 0 || !(spacing > 0.0) {
            return Err(Error::InvalidParameter("array needs positive size and spacing"));
        }
        Ok(Self { n_v, n_h, spacing })
    }

    pub fn len(&self) -> usize {
        self.n_v * self.n_h
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Element positions centred on the origin.
    pub fn positions(&self) -> Vec<[f64; 3]> {
        let cv = (self.n_v as f64 - 1.0) / 2.0;
        let ch = (self.n_h as f64 - 1.0) / 2.0;
        let mut out = Vec::with_capacity(self.len());
        for u in 0..self.n_v {
            for v in 0..self.n_h {
                out.push([0.0, (v as f64 - ch) * self.spacing, (u as f64 - cv) * self.spacing]);
            }
        }
        out
    }

    /// Distance from the array centre to the farthest element.
    pub fn radius(&self) -> f64 {
        let a = (self.n_v as f64 - 1.0) * self.spacing / 2.0;
        let b = (self.n_h as f64 - 1.0) * self.spacing / 2.0;
        libm::sqrt(a * a + b * b)
    }

    /// Steering vector `a_n(ψ) = √G(ψ) e^{j k r̂·x_n}`.
    pub fn steering(&self, theta: f64, phi: f64) -> Vec<c64> {
        let r = spherical_basis(theta, phi)[0];
        let amp = libm::sqrt(element_gain(theta, phi));
        self.positions().iter().map(|x| cis(K0 * (r[0] * x[0] + r[1] * x[1] + r[2] * x[2])) * amp).collect()
    }
}

/// DFT weight of element `(u, v)` for beam `(p, q)` on an `n_v × n_h` block
/// with beam interval coefficient `a`.
pub fn dft_weight(u: usize, v: usize, p: usize, q: usize, n_v: usize, n_h: usize, a: usize) -> Result<c64> {
    if a == 0 || u >= n_v || v >= n_h || p >= a * n_v || q >= a * n_h {
        return Err(Error::OutOfRange("DFT weight index"));
    }
    let ph = -2.0 * core::f64::consts::PI * ((u * p) as f64 / (a * n_v) as f64 + (v * q) as f64 / (a * n_h) as f64);
    Ok(cis(ph) / libm::sqrt((n_v * n_h) as f64))
}

/// Candidate beams as columns of a weight matrix over all array elements.
/// Sub-array columns are zero outside their group; each group feeds one RF
/// chain and may be used once.
#[derive(Debug, Clone)]
pub struct Codebook {
    pub weights: Mat<c64>,
    /// Group of every column; all zeros for the full array.
    pub groups: Vec<usize>,
    pub n_groups: usize,
    /// Sub-array shape, `None` for the full array.
    pub subarray: Option<(usize, usize)>,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.weights.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Most beams that can be selected at once.
    pub fn max_streams(&self) -> usize {
        match self.subarray {
            None => self.weights.nrows().min(self.len()),
            Some(_) => self.n_groups,
        }
    }

    /// The weight columns at `idx`.
    pub fn columns(&self, idx: &[usize]) -> Mat<c64> {
        Mat::from_fn(self.weights.nrows(), idx.len(), |i, k| self.weights[(i, idx[k])])
    }
}

fn dft_block(n_v: usize, n_h: usize, a: usize) -> Mat<c64> {
    let nq = a * n_h;
    Mat::from_fn(n_v * n_h, a * n_v * nq, |row, col| {
        dft_weight(row / n_h, row % n_h, col / nq, col % nq, n_v, n_h, a).expect("indices in range")
    })
}

/// Full-array codebook of `a² N` columns; column `p · a N_H + q` is beam `(p, q)`.
pub fn full_codebook(array: &PlanarArray, a: usize) -> Result<Codebook> {
    if a == 0 {
        return Err(Error::InvalidParameter("beam interval must be at least 1"));
    }
    Ok(Codebook { weights: dft_block(array.n_v, array.n_h, a), groups: vec![0; a * a * array.len()], n_groups: 1, subarray: None })
}

/// Sub-array codebook with groups of `sv × sh` elements. Groups are numbered
/// row-major over the block grid; each carries all `a² sv sh` block beams.
pub fn sub_codebook(array: &PlanarArray, sv: usize, sh: usize, a: usize) -> Result<Codebook> {
    if a == 0 || sv == 0 || sh == 0 || !array.n_v.is_multiple_of(sv) || !array.n_h.is_multiple_of(sh) {
        return Err(Error::InvalidParameter("sub-array shape must tile the array"));
    }
    let block = dft_block(sv, sh, a);
    let per = block.ncols();
    let (gv, gh) = (array.n_v / sv, array.n_h / sh);
    let n_groups = gv * gh;
    let mut w = Mat::<c64>::zeros(array.len(), n_groups * per);
    let mut groups = Vec::with_capacity(n_groups * per);
    for g in 0..n_groups {
        let (bu, bv) = (g / gh, g % gh);
        for c in 0..per {
            let col = g * per + c;
            for u in 0..sv {
                for v in 0..sh {
                    w[((bu * sv + u) * array.n_h + bv * sh + v, col)] = block[(u * sh + v, c)];
                }
            }
            groups.push(g);
        }
    }
    Ok(Codebook { weights: w, groups, n_groups, subarray: Some((sv, sh)) })
}

/// Pattern of beam `weights` in one direction, `Σ_n w_n a_n(ψ)`.
pub fn array_beam_pattern(weights: &[c64], array: &PlanarArray, theta: f64, phi: f64) -> Result<TangentField> {
    if weights.len() != array.len() {
        return Err(Error::Dimension("weight count does not match the array"));
    }
    let a = array.steering(theta, phi);
    let g: c64 = weights.iter().zip(&a).map(|(w, a)| w * a).sum();
    Ok(TangentField { theta: g, phi: c64::new(0.0, 0.0) })
}

/// Power pattern `N_UE · G` of a UE patch array whose elements are used directly.
pub fn ue_power_pattern(n_ue: usize, grid: &DirectionGrid) -> Vec<f64> {
    (0..grid.len())
        .map(|k| {
            let (t, p) = grid.node(k);
            n_ue as f64 * element_gain(t, p)
        })
        .collect()
}

/// UE element spacing that keeps the aperture fixed as `N_UE` grows.
pub fn ue_spacing(n_ue: usize) -> f64 {
    let s = libm::sqrt(n_ue as f64);
    if s > 1.0 {
        0.5 / (s - 1.0)
    } else {
        0.5
    }
}

/// Element-domain correlation `R_elem = Σ_ψ w P_BS(ψ) a(ψ) a(ψ)ᴴ`.
pub fn element_correlation(array: &PlanarArray, grid: &DirectionGrid, marginal: &[f64]) -> Result<Mat<c64>> {
    if marginal.len() != grid.len() {
        return Err(Error::Dimension("marginal does not match the grid"));
    }
    if let Some(k) = marginal.iter().position(|&v| v < 0.0 || v.is_nan()) {
        return Err(Error::NegativeMarginal(k));
    }
    let n = array.len();
    let mut r = Mat::<c64>::zeros(n, n);
    for k in 0..grid.len() {
        let s = marginal[k] * grid.weight(k);
        if s == 0.0 {
            continue;
        }
        let (t, p) = grid.node(k);
        let a = array.steering(t, p);
        for j in 0..n {
            let aj = a[j].conj() * s;
            for i in 0..n {
                r[(i, j)] += a[i] * aj;
            }
        }
    }
    Ok(hermitize(&r))
}

/// Element-domain correlation of the BS array against a UE array of `n_ue`
/// elements through the joint profile.
pub fn element_correlation_for_ue(array: &PlanarArray, kernel: &ProfileKernel, n_ue: usize) -> Result<Mat<c64>> {
    let marg = kernel.marginal_bs(&ue_power_pattern(n_ue, &kernel.grid_ue))?;
    element_correlation(array, &kernel.grid_bs, &marg)
}

/// Beam-space correlation `Wᵀ R_elem W*`.
pub fn beam_correlation(w: &Mat<c64>, r_elem: &Mat<c64>) -> Result<Mat<c64>> {
    if w.nrows() != r_elem.nrows() {
        return Err(Error::Dimension("weights do not match the element correlation"));
    }
    let wc = Mat::<c64>::from_fn(w.nrows(), w.ncols(), |i, j| w[(i, j)].conj());
    Ok(hermitize(&(w.transpose() * r_elem * wc)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMetric {
    Power,
    Determinant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamSelection {
    pub metric: SelectionMetric,
    /// Codebook columns in selection order.
    pub chosen: Vec<usize>,
    /// Per step: the beam's received power (power rule) or `log10 det` of the
    /// selected set after the step (determinant rule).
    pub scores: Vec<f64>,
}

fn beam_powers(codebook: &Codebook, r_elem: &Mat<c64>) -> Vec<f64> {
    let d = &codebook.weights;
    let rd = r_elem * Mat::<c64>::from_fn(d.nrows(), d.ncols(), |i, j| d[(i, j)].conj());
    (0..d.ncols()).map(|c| (0..d.nrows()).map(|i| d[(i, c)] * rd[(i, c)]).sum::<c64>().re).collect()
}

fn check_request(codebook: &Codebook, r_elem: &Mat<c64>, m: usize) -> Result<()> {
    if r_elem.nrows() != codebook.weights.nrows() {
        return Err(Error::Dimension("codebook does not match the element correlation"));
    }
    let available = codebook.max_streams();
    if m > available || m > codebook.len() {
        return Err(Error::TooManyBeams { requested: m, available });
    }
    Ok(())
}

/// Picks the best admissible candidate; scores within `1e-12` relative of the
/// best so far lose to the earlier index.
fn argmax_admissible(scores: &[f64], taken: &[bool], group_used: &[bool], groups: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (c, &v) in scores.iter().enumerate() {
        if taken[c] || group_used[groups[c]] {
            continue;
        }
        match best {
            Some((_, bv)) if v <= bv + 1e-12 * bv.abs() => {}
            _ => best = Some((c, v)),
        }
    }
    best.map(|b| b.0)
}

/// `M` distinct beams in descending order of received power.
pub fn greedy_select_power(codebook: &Codebook, r_elem: &Mat<c64>, m: usize) -> Result<BeamSelection> {
    check_request(codebook, r_elem, m)?;
    let scores = beam_powers(codebook, r_elem);
    let mut taken = vec![false; codebook.len()];
    let mut group_used = vec![false; codebook.n_groups];
    let sub = codebook.subarray.is_some();
    let mut sel = BeamSelection { metric: SelectionMetric::Power, chosen: Vec::new(), scores: Vec::new() };
    for _ in 0..m {
        let c = argmax_admissible(&scores, &taken, &group_used, &codebook.groups)
            .ok_or(Error::TooManyBeams { requested: m, available: sel.chosen.len() })?;
        taken[c] = true;
        if sub {
            group_used[codebook.groups[c]] = true;
        }
        sel.chosen.push(c);
        sel.scores.push(scores[c]);
    }
    Ok(sel)
}

/// Grows the selection one beam at a time, maximizing the determinant of the
/// beam-space correlation. The determinant gain of a candidate is its residual
/// diagonal in a pivoted Cholesky factorization of the beam Gram matrix.
pub fn greedy_select_det(codebook: &Codebook, r_elem: &Mat<c64>, m: usize) -> Result<BeamSelection> {
    check_request(codebook, r_elem, m)?;
    let d = &codebook.weights;
    let nc = d.ncols();
    // B = Dᵀ R, so that G[:, c] = B d_c*
    let b = d.transpose() * r_elem;
    let mut resid = beam_powers(codebook, r_elem);
    let mut l_cols: Vec<Vec<c64>> = Vec::new();
    let mut taken = vec![false; nc];
    let mut group_used = vec![false; codebook.n_groups];
    let sub = codebook.subarray.is_some();
    let mut logdet = 0.0;
    let mut sel = BeamSelection { metric: SelectionMetric::Determinant, chosen: Vec::new(), scores: Vec::new() };
    for _ in 0..m {
        let c = argmax_admissible(&resid, &taken, &group_used, &codebook.groups)
            .ok_or(Error::TooManyBeams { requested: m, available: sel.chosen.len() })?;
        let piv = resid[c];
        taken[c] = true;
        if sub {
            group_used[codebook.groups[c]] = true;
        }
        sel.chosen.push(c);
        logdet += if piv > 0.0 { libm::log10(piv) } else { f64::NEG_INFINITY };
        sel.scores.push(logdet);
        if piv <= 0.0 {
            l_cols.push(vec![c64::new(0.0, 0.0); nc]);
            continue;
        }
        let mut g: Vec<c64> = (0..nc).map(|k| (0..d.nrows()).map(|i| b[(k, i)] * d[(i, c)].conj()).sum()).collect();
        for l in &l_cols {
            let lc = l[c].conj();
            for k in 0..nc {
                g[k] -= l[k] * lc;
            }
        }
        let s = libm::sqrt(piv);
        for (k, gk) in g.iter_mut().enumerate() {
            *gk /= s;
            resid[k] -= gk.norm_sqr();
        }
        l_cols.push(g);
    }
    Ok(sel)
}

pub fn select(codebook: &Codebook, r_elem: &Mat<c64>, m: usize, metric: SelectionMetric) -> Result<BeamSelection> {
    match metric {
        SelectionMetric::Power => greedy_select_power(codebook, r_elem, m),
        SelectionMetric::Determinant => greedy_select_det(codebook, r_elem, m),
    }
}

/// `10 log10 det` of the beam correlation of a selection.
pub fn selection_det_db(codebook: &Codebook, r_elem: &Mat<c64>, chosen: &[usize]) -> Result<f64> {
    Ok(10.0 * log10_det_hermitian(&beam_correlation(&codebook.columns(chosen), r_elem)?)?)
}

/// Outcome of a selection followed by rank adaptation over its prefixes.
#[derive(Debug, Clone)]
pub struct BaselineResult {
    pub selection: BeamSelection,
    pub report: CapacityReport,
}

/// Selects up to `m_max` beams and rank-adapts over the first `M` of them.
pub fn evaluate(codebook: &Codebook, r_elem: &Mat<c64>, m_max: usize, metric: SelectionMetric, snr: f64) -> Result<BaselineResult> {
    let selection = select(codebook, r_elem, m_max, metric)?;
    let report = rank_adapt(&mut |m| beam_correlation(&codebook.columns(&selection.chosen[..m]), r_elem), m_max, snr)?;
    Ok(BaselineResult { selection, report })
}

#[derive(Debug, Clone)]
pub struct PartitionResult {
    pub subarray: (usize, usize),
    pub result: BaselineResult,
    /// Best capacity of every candidate, in candidate order.
    pub candidates: Vec<((usize, usize), f64)>,
}

/// Sub-array shape with the highest rank-adapted capacity. The stream count is
/// capped at `min(groups, m_cap)`; ties keep the earlier candidate.
pub fn best_subarray_partition(
    array: &PlanarArray,
    candidates: &[(usize, usize)],
    a: usize,
    r_elem: &Mat<c64>,
    m_cap: usize,
    metric: SelectionMetric,
    snr: f64,
) -> Result<PartitionResult> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("no sub-array candidates"));
    }
    let mut best: Option<((usize, usize), BaselineResult)> = None;
    let mut scores = Vec::with_capacity(candidates.len());
    for &(sv, sh) in candidates {
        let cb = sub_codebook(array, sv, sh, a)?;
        let res = evaluate(&cb, r_elem, cb.max_streams().min(m_cap).max(1), metric, snr)?;
        scores.push(((sv, sh), res.report.total));
        if best.as_ref().is_none_or(|b| res.report.total > b.1.report.total) {
            best = Some(((sv, sh), res));
        }
    }
    let (subarray, result) = best.expect("candidates nonempty");
    Ok(PartitionResult { subarray, result, candidates: scores })
}
