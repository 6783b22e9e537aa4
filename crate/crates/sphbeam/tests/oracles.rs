//! Library results against independent brute-force evaluations at desk scale.

use sphbeam::angular_profile::{DirectionGrid, JointProfile, Polarization, ProfileKernel, ProfileParams};
use sphbeam::capacity::{average_capacity, rank_adapt};
use sphbeam::correlation::{beam_correlation, calibrated_snr, siso_power, ModeBasis};
use sphbeam::obpb::{self, optimize_side, Link, ObpbConfig, Side};
use sphbeam::spherical_modes::{far_field_all, far_field_function, spherical_basis, ModeIndex, ModeSet};
use sphbeam::surface_projection::{transfer_matrix, SurfaceSampling};
use sphbeam::{c64, Mat, K0};

fn max_abs(a: &Mat<c64>) -> f64 {
    (0..a.ncols()).flat_map(|j| (0..a.nrows()).map(move |i| (i, j))).map(|(i, j)| a[(i, j)].norm()).fold(0.0, f64::max)
}

fn rel_diff(a: &Mat<c64>, b: &Mat<c64>) -> f64 {
    max_abs(&(a - b)) / max_abs(b)
}

fn theta_fields(modes: &ModeSet, grid: &DirectionGrid) -> Vec<Vec<c64>> {
    (0..grid.len())
        .map(|k| {
            let (t, p) = grid.node(k);
            modes.modes().iter().map(|&m| far_field_function(m, t, p).unwrap().theta).collect()
        })
        .collect()
}

struct Desk {
    profile: JointProfile,
    modes: ModeSet,
    gb: DirectionGrid,
    gu: DirectionGrid,
    link: Link,
}

fn desk() -> Desk {
    let profile = JointProfile::new(ProfileParams::default()).unwrap();
    let modes = ModeSet::new(2);
    let (gb, gu) = (DirectionGrid::new(32, 64).unwrap(), DirectionGrid::new(16, 32).unwrap());
    let link = Link::new(&profile, modes.clone(), modes.clone(), gb.clone(), gu.clone());
    Desk { profile, modes, gb, gu, link }
}

fn mixture(j: usize, m: usize, a: f64, b: f64) -> Mat<c64> {
    Mat::from_fn(j, m, |i, s| c64::new(((i + 3 * s) as f64 * a).cos(), ((i * (s + 2)) as f64 * b).sin()) / 3.0)
}

#[test]
fn pruned_kernel_marginal_matches_direct_sum() {
    let d = desk();
    let ue = d.link.ue.power(&mixture(16, 2, 0.7, 0.3), Polarization::Theta).unwrap();
    let fast = d.link.kernel.marginal_bs(&ue).unwrap();
    let slow = d.profile.marginal_bs_direct(&d.gb, &d.gu, &ue).unwrap();
    let peak = slow.iter().copied().fold(0.0, f64::max);
    for (f, s) in fast.iter().zip(&slow) {
        assert!((f - s).abs() <= 1e-10 * peak);
    }
    let bs = d.link.bs.power(&mixture(16, 3, 0.45, 0.2), Polarization::Theta).unwrap();
    let fast = d.link.kernel.marginal_ue(&bs).unwrap();
    let slow = d.profile.marginal_ue_direct(&d.gb, &d.gu, &bs).unwrap();
    let peak = slow.iter().copied().fold(0.0, f64::max);
    for (f, s) in fast.iter().zip(&slow) {
        assert!((f - s).abs() <= 1e-10 * peak);
    }
}

#[test]
fn mode_and_beam_correlation_match_quadrature() {
    let d = desk();
    let j = d.modes.mode_count();
    let q_ue = mixture(j, 2, 0.7, 0.3);
    let q_bs = mixture(j, 3, 0.45, 0.2);
    let (kb, ku) = (theta_fields(&d.modes, &d.gb), theta_fields(&d.modes, &d.gu));
    let pat = |k: &[Vec<c64>], q: &Mat<c64>, n: usize, s: usize| -> c64 { (0..j).map(|i| q[(i, s)] * k[n][i]).sum() };
    let ue_power: Vec<f64> = (0..d.gu.len()).map(|u| (0..2).map(|s| pat(&ku, &q_ue, u, s).norm_sqr()).sum()).collect();
    let marg: Vec<f64> = (0..d.gb.len())
        .map(|b| (0..d.gu.len()).map(|u| d.profile.joint_density(d.gb.node(b), d.gu.node(u)) * ue_power[u] * d.gu.weight(u)).sum())
        .collect();
    let r = Mat::<c64>::from_fn(j, j, |a, b| (0..d.gb.len()).map(|n| kb[n][a] * kb[n][b].conj() * (marg[n] * d.gb.weight(n))).sum());
    let lib = d.link.mode_correlation(Side::Bs, &q_ue).unwrap();
    assert!(rel_diff(&lib, &r) < 1e-10);

    let rb = Mat::<c64>::from_fn(3, 3, |a, b| {
        (0..d.gb.len()).map(|n| pat(&kb, &q_bs, n, a) * pat(&kb, &q_bs, n, b).conj() * (marg[n] * d.gb.weight(n))).sum()
    });
    assert!(rel_diff(&d.link.beam_correlation(&q_bs, &q_ue).unwrap(), &rb) < 1e-10);
    assert!(rel_diff(&beam_correlation(&q_bs, &lib).unwrap(), &rb) < 1e-10);

    // trace equals the quadrature of Σ_j |K_j|² times the marginal
    let tr: f64 = (0..j).map(|i| lib[(i, i)].re).sum();
    let env = d.link.bs.total_mode_power(Polarization::Theta);
    let quad: f64 = (0..d.gb.len()).map(|n| env[n] * marg[n] * d.gb.weight(n)).sum();
    assert!((tr - quad).abs() < 1e-8 * quad);
}

#[test]
fn optimize_side_returns_eigenpairs_of_brute_force_correlation() {
    let d = desk();
    let q_ue = d.link.omni(Side::Ue);
    let r = d.link.mode_correlation(Side::Bs, &q_ue).unwrap();
    let (lam, q) = optimize_side(&d.link, Side::Bs, &q_ue, 4).unwrap();
    // columns of Q are conjugated eigenvectors: R conj(q) = λ conj(q)
    for k in 0..4 {
        let v = Mat::<c64>::from_fn(r.nrows(), 1, |i, _| q[(i, k)].conj());
        let rv = &r * &v;
        let res = Mat::<c64>::from_fn(r.nrows(), 1, |i, _| rv[(i, 0)] - v[(i, 0)] * lam[k]);
        assert!(max_abs(&res) < 1e-10 * lam[0]);
    }
    for w in lam.windows(2) {
        assert!(w[0] >= w[1]);
    }
    // orthonormal columns
    let g = q.adjoint() * &q;
    for a in 0..4 {
        for b in 0..4 {
            let e = if a == b { 1.0 } else { 0.0 };
            assert!((g[(a, b)] - c64::new(e, 0.0)).norm() < 1e-12);
        }
    }
    let rb = beam_correlation(&q, &r).unwrap();
    for a in 0..4 {
        assert!((rb[(a, a)].re - lam[a]).abs() < 1e-10 * lam[0]);
    }
}

#[test]
fn isotropic_profile_gives_scaled_identity() {
    let modes = ModeSet::new(3);
    let grid = DirectionGrid::new(24, 48).unwrap();
    let basis = ModeBasis::new(modes, grid);
    let marg = vec![1.0 / (4.0 * std::f64::consts::PI); basis.grid.len()];
    let r = basis.mode_correlation(&marg, Polarization::Both).unwrap();
    for i in 0..r.nrows() {
        for j in 0..r.ncols() {
            let e = if i == j { 1.0 } else { 0.0 };
            assert!((r[(i, j)] - c64::new(e, 0.0)).norm() < 1e-12, "({i},{j}) {}", r[(i, j)]);
        }
    }
}

#[test]
fn transfer_matrix_matches_radiated_field_expansion() {
    // expand the far field of a current element e^{jk r̂·x} (t − r̂(r̂·t)) in
    // the K_j; the result must be one common constant times the Z column
    let modes = ModeSet::new(4);
    let g = DirectionGrid::new(48, 96).unwrap();
    let x = [0.13, -0.2, 0.11];
    for t in [[0.2f64, 0.5, 0.84], [1.0, 0.0, 0.0], [0.0, -0.6, 0.8]] {
        let n = (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt();
        let t = [t[0] / n, t[1] / n, t[2] / n];
        let smp = SurfaceSampling { points: vec![x], tangents: vec![[t, [0.0, 0.0, 1.0]]] };
        let z = transfer_matrix(&smp, &modes);
        let mut q = vec![c64::new(0.0, 0.0); modes.mode_count()];
        for k in 0..g.len() {
            let (th, ph) = g.node(k);
            let b = spherical_basis(th, ph);
            let ph_ = c64::from_polar(1.0, K0 * (b[0][0] * x[0] + b[0][1] * x[1] + b[0][2] * x[2]));
            let et = ph_ * (b[1][0] * t[0] + b[1][1] * t[1] + b[1][2] * t[2]);
            let ep = ph_ * (b[2][0] * t[0] + b[2][1] * t[1] + b[2][2] * t[2]);
            for (j, f) in far_field_all(&modes, th, ph).iter().enumerate() {
                q[j] += (et * f.theta.conj() + ep * f.phi.conj()) * g.weight(k);
            }
        }
        let num: c64 = (0..q.len()).map(|j| q[j] * z[(j, 0)].conj()).sum();
        let den: f64 = (0..q.len()).map(|j| z[(j, 0)].norm_sqr()).sum();
        let c = num / den;
        let scale = q.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for j in 0..q.len() {
            assert!((q[j] - c * z[(j, 0)]).norm() < 1e-9 * scale, "mode {:?}", modes.modes()[j]);
        }
        // the constant does not depend on the element
        assert!((c.norm() - 44.5466).abs() < 1e-3, "{c}");
    }
}

#[test]
fn omni_reference_power_matches_quadrature() {
    let d = desk();
    let omni = ModeIndex::new(2, 0, 1).unwrap();
    let pb: Vec<f64> = (0..d.gb.len()).map(|k| far_field_function(omni, d.gb.node(k).0, 0.0).unwrap().theta.norm_sqr()).collect();
    let pu: Vec<f64> = (0..d.gu.len()).map(|k| far_field_function(omni, d.gu.node(k).0, 0.0).unwrap().theta.norm_sqr()).collect();
    let direct: f64 = (0..d.gb.len())
        .map(|b| {
            let inner: f64 = (0..d.gu.len()).map(|u| d.profile.joint_density(d.gb.node(b), d.gu.node(u)) * pu[u] * d.gu.weight(u)).sum();
            inner * pb[b] * d.gb.weight(b)
        })
        .sum();
    let marg = d.link.marginal(Side::Bs, &d.link.omni(Side::Ue)).unwrap();
    let lib = siso_power(&pb, &marg, &d.gb);
    assert!((lib - direct).abs() < 1e-10 * direct);
    let snr = calibrated_snr(lib, -12.0);
    // the omni link then sees exactly −12 dB
    assert!((10.0 * (lib * snr).log10() + 12.0).abs() < 1e-12);
}

#[test]
fn obpb_history_is_monotone_and_bounded_on_desk_link() {
    let d = desk();
    let kernel = ProfileKernel::new(&d.profile, d.gb.clone(), d.gu.clone());
    assert!(kernel.active_rows() > 0);
    for m in [1, 2, 4] {
        let st = obpb::run(&d.link, &ObpbConfig::default(), m).unwrap();
        let bound = obpb::objective_bound(&d.link, m).unwrap();
        for w in st.objective_history.windows(2) {
            assert!(w[1] >= w[0] * (1.0 - 1e-9));
        }
        assert!(st.objective() <= bound * (1.0 + 1e-9));
        assert!(st.converged);
        let r = d.link.beam_correlation(&st.q_bs, &st.q_ue).unwrap();
        let cap = average_capacity(&r, 1.0).unwrap();
        let rep = rank_adapt(&mut |k| Ok(Mat::from_fn(k, k, |a, b| r[(a, b)])), m, 1.0).unwrap();
        assert!(rep.total >= cap - 1e-12);
    }
}
