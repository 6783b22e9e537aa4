//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
//!
//! Runs the shipped `paper_baseline` scenario in-process (twice, for the
//! determinism check) and evaluates the remaining criteria directly against
//! the library.

#![allow(clippy::needless_range_loop)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sphbeam::angular_profile::{DirectionGrid, JointProfile, Polarization, ProfileParams};
use sphbeam::correlation::{beam_correlation, ModeBasis};
use sphbeam::obpb::{optimize_side, Link, Side};
use sphbeam::spherical_modes::{far_field_function, mode_count_for_radius, ModeSet};
use sphbeam::surface_projection::{sample_surface, transfer_matrix, AntennaSurface, ProjectionOperator, SurfaceKind};
use sphbeam::{c64, Mat};
use sphbeam_cli::artifacts::{read_manifest, Manifest, ObpbStateRecord, PointRecord};
use sphbeam_cli::config::Scenario;
use sphbeam_cli::pipeline::run_scenario;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn max_abs_diff(a: &Mat<c64>, b: &Mat<c64>) -> f64 {
    let mut d: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            d = d.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    d
}

fn max_abs(a: &Mat<c64>) -> f64 {
    let mut d: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            d = d.max(a[(i, j)].norm());
        }
    }
    d
}

fn point<'a>(m: &'a Manifest, method: &str, n_ue: usize) -> &'a PointRecord {
    m.points.iter().find(|p| p.method == method && p.n_ue == n_ue).unwrap_or_else(|| panic!("no point {method} N_UE={n_ue}"))
}

fn normalized(dir: &Path, method: &str, n_ue: usize) -> Vec<Vec<f64>> {
    let s = fs::read_to_string(dir.join(method).join(format!("nue_{n_ue}/correlation.json"))).unwrap();
    let v: serde_json::Value = serde_json::from_str(&s).unwrap();
    serde_json::from_value(v["normalized"].clone()).unwrap()
}

/// Mode orthogonality and the mode counts of the two antenna volumes.
fn criterion_1() -> Outcome {
    let j_bs = mode_count_for_radius(4.0 / 2f64.sqrt());
    let j_ue = mode_count_for_radius(1.0 / 2f64.sqrt());
    let grid = DirectionGrid::new(96, 192).unwrap();
    let basis = ModeBasis::new(ModeSet::new(17), grid);
    let ones = vec![1.0; basis.grid.len()];
    let g = basis.mode_correlation(&ones, Polarization::Both).unwrap();
    let diag = (0..g.nrows()).map(|i| g[(i, i)].re).fold(0.0, f64::max);
    let mut off: f64 = 0.0;
    let mut spread: f64 = 0.0;
    for i in 0..g.nrows() {
        spread = spread.max((g[(i, i)].re - diag).abs() / diag);
        for j in 0..g.ncols() {
            if i != j {
                off = off.max(g[(i, j)].norm() / diag);
            }
        }
    }
    outcome(
        j_bs == 646 && j_ue == 48 && g.nrows() == 646 && off < 1e-8 && spread < 1e-8,
        format!("J = {j_bs}/{j_ue}, max relative off-diagonal {off:.2e}, diagonal spread {spread:.2e}"),
    )
}

/// Projector laws for the three surfaces.
fn criterion_2(sc: &Scenario, q_bs: &Mat<c64>) -> Outcome {
    let modes = ModeSet::for_radius(sc.antenna.r0_bs);
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (kind, name) in
        [(SurfaceKind::Hemisphere, "hemisphere"), (SurfaceKind::ThirtySecondSphere, "1/32-sphere"), (SurfaceKind::Plane, "plane")]
    {
        let s = sample_surface(&AntennaSurface::new(kind, sc.antenna.r0_bs).unwrap(), sc.surface.density).unwrap();
        let op = ProjectionOperator::with_tolerance(transfer_matrix(&s, &modes), sc.surface.pinv_tolerance).unwrap();
        let p = op.projector();
        let idem = max_abs_diff(&(&p * &p), &p);
        let herm = max_abs_diff(&p.adjoint().to_owned(), &p);
        let once = op.project(q_bs).unwrap().q_semi;
        let twice = op.project(&once).unwrap().q_semi;
        let proj = max_abs_diff(&twice, &once) / max_abs(&once);
        let w = idem.max(herm).max(proj);
        worst = worst.max(w);
        parts.push(format!("{name} {w:.1e}"));
    }
    outcome(worst <= 1e-8, parts.join(", "))
}

/// OBPB objective monotonicity and convergence.
fn criterion_3(m: &Manifest) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for streams in [1usize, 2, 4, 8] {
        let r = m.obpb_runs.iter().find(|r| r.streams == streams).expect("run for M");
        let mono = r.objective_history.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs());
        let conv_needed = streams <= 4;
        ok &= mono && (!conv_needed || (r.converged && r.iterations <= 200));
        parts.push(format!("M={streams}: monotone={mono} converged={} iters={}", r.converged, r.iterations));
    }
    outcome(ok, parts.join("; "))
}

fn off_pairs(rn: &[Vec<f64>], threshold: f64) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for i in 0..rn.len() {
        for j in i + 1..rn.len() {
            if rn[i][j] > threshold {
                v.push((i, j));
            }
        }
    }
    v
}

/// Correlation structure and determinant ordering at M = 4, N_UE = 4.
fn criterion_4(m: &Manifest, dir: &Path) -> Vec<(String, Outcome)> {
    let det = |meth: &str| point(m, meth, 4).det_db;
    let off = |meth: &str| point(m, meth, 4).max_off_diagonal;
    let mut out = Vec::new();
    let (h, s) = (off("obpb_hemisphere"), off("obpb_thirty_second_sphere"));
    out.push(("4a".into(), outcome(h <= 1e-2 && s <= 1e-2, format!("hemisphere {h:.4}, 1/32-sphere {s:.4} (limit 1e-2)"))));

    let plane = normalized(dir, "obpb_plane", 4);
    let pairs = off_pairs(&plane, 1e-3);
    let p = off("obpb_plane");
    out.push((
        "4b".into(),
        outcome(
            p <= 0.05 && pairs == vec![(0, 2), (1, 3)],
            format!("plane max {p:.4}, pairs above 1e-3: {pairs:?} (expected [(0, 2), (1, 3)])"),
        ),
    ));

    let pw = off("full_array_power");
    out.push(("4c".into(), outcome(pw >= 0.5, format!("full-array(power) max off-diagonal {pw:.3}"))));

    let (dh, ds, dp) = (det("obpb_hemisphere"), det("obpb_thirty_second_sphere"), det("obpb_plane"));
    let (dd, dsub, dpow) = (det("full_array_determinant"), det("sub_array"), det("full_array_power"));
    let ok = (dh - ds).abs() <= 1.0 && dh.min(ds) >= dp + 5.0 && dp >= dd.max(dsub) + 5.0 && dd.min(dsub) >= dpow + 5.0;
    out.push((
        "4d".into(),
        outcome(
            ok,
            format!("det_db hemisphere {dh:.1}, 1/32 {ds:.1}, plane {dp:.1}, full(det) {dd:.1}, sub {dsub:.1}, full(power) {dpow:.1}"),
        ),
    ));
    out
}

/// Sub-array partition choice per N_UE.
fn criterion_5(m: &Manifest) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for &n in &m.scenario.n_ue {
        let expect = match n {
            4 => [8, 2],
            9 => [4, 2],
            _ => [4, 1],
        };
        let got = point(m, "sub_array", n).subarray.expect("sub-array shape");
        ok &= got == expect;
        parts.push(format!("{n}:{}x{}", got[0], got[1]));
    }
    outcome(ok, format!("{} (expected 8x2, 4x2, then 4x1)", parts.join(" ")))
}

/// Rank adaptation at N_UE = 49 and OBPB stream count stability.
fn criterion_6(m: &Manifest) -> Outcome {
    let pw = point(m, "full_array_power", 49).m_opt;
    let dt = point(m, "full_array_determinant", 49).m_opt;
    let sub = point(m, "sub_array", 49).m_opt;
    let mut stable = true;
    for meth in ["obpb_optimal", "obpb_hemisphere", "obpb_thirty_second_sphere", "obpb_plane"] {
        let v: Vec<usize> = m.points.iter().filter(|p| p.method == meth).map(|p| p.m_opt).collect();
        stable &= v.windows(2).all(|w| w[0] == w[1]);
    }
    let ok = pw.abs_diff(20) <= 2 && dt.abs_diff(27) <= 2 && sub <= 16 && stable;
    outcome(ok, format!("full(power) {pw} (20±2), full(det) {dt} (27±2), sub {sub} (≤16), OBPB constant {stable}"))
}

/// Capacity ratio of the curved surfaces over the best conventional method.
fn criterion_7(m: &Manifest) -> Outcome {
    let mut worst = f64::INFINITY;
    let mut parts = Vec::new();
    for &n in &m.scenario.n_ue {
        let best = ["full_array_power", "full_array_determinant", "sub_array"].iter().map(|k| point(m, k, n).capacity).fold(0.0, f64::max);
        let h = point(m, "obpb_hemisphere", n).capacity / best;
        let s = point(m, "obpb_thirty_second_sphere", n).capacity / best;
        worst = worst.min(h).min(s);
        parts.push(format!("{n}:{h:.2}/{s:.2}"));
    }
    outcome(worst >= 3.0, format!("hemisphere/1/32 ratios {} (min {worst:.2}, limit 3.0)", parts.join(" ")))
}

/// Small Hermitian eigen-solver: cyclic Jacobi on the real 2n×2n embedding.
fn jacobi_eigen(r: &Mat<c64>) -> (Vec<f64>, Vec<Vec<c64>>) {
    let n = r.nrows();
    let m = 2 * n;
    let mut a = vec![vec![0.0; m]; m];
    for i in 0..n {
        for j in 0..n {
            let z = r[(i, j)];
            a[i][j] = z.re;
            a[i + n][j + n] = z.re;
            a[i][j + n] = -z.im;
            a[i + n][j] = z.im;
        }
    }
    let mut v = vec![vec![0.0; m]; m];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..100 {
        let off: f64 = (0..m).flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&x, &y| a[y][y].partial_cmp(&a[x][x]).unwrap());
    // every eigenvalue appears twice in the embedding
    let vals = idx.iter().step_by(2).map(|&k| a[k][k]).collect();
    let vecs = idx.iter().step_by(2).map(|&k| (0..n).map(|i| c64::new(v[i][k], v[i + n][k])).collect()).collect();
    (vals, vecs)
}

/// Brute-force oracles at N_tr = 2.
fn criterion_8() -> Outcome {
    let profile = JointProfile::new(ProfileParams::default()).unwrap();
    let (gb, gu) = (DirectionGrid::new(32, 64).unwrap(), DirectionGrid::new(16, 32).unwrap());
    let modes = ModeSet::new(2);
    let link = Link::new(&profile, modes.clone(), modes.clone(), gb.clone(), gu.clone());
    let j = modes.mode_count();
    let kth = |g: &DirectionGrid| -> Vec<Vec<c64>> {
        (0..g.len())
            .map(|k| {
                let (t, p) = g.node(k);
                modes.modes().iter().map(|&idx| far_field_function(idx, t, p).unwrap().theta).collect()
            })
            .collect()
    };
    let (kb, ku) = (kth(&gb), kth(&gu));
    // UE pattern: a fixed two-stream mixture of modes
    let q_ue = Mat::<c64>::from_fn(j, 2, |i, s| c64::new(((i + 3 * s) as f64 * 0.7).cos(), ((i * (s + 2)) as f64 * 0.3).sin()) / 3.0);
    let q_bs = Mat::<c64>::from_fn(j, 3, |i, s| c64::new(((i * 2 + s) as f64 * 0.45).sin(), ((i + 5 * s) as f64 * 0.2).cos()) / 3.0);
    let pattern = |k: &[Vec<c64>], q: &Mat<c64>, node: usize, s: usize| -> c64 { (0..j).map(|i| q[(i, s)] * k[node][i]).sum() };
    let ue_power: Vec<f64> = (0..gu.len()).map(|u| (0..2).map(|s| pattern(&ku, &q_ue, u, s).norm_sqr()).sum()).collect();
    let marg: Vec<f64> = (0..gb.len())
        .map(|b| (0..gu.len()).map(|u| profile.joint_density(gb.node(b), gu.node(u)) * ue_power[u] * gu.weight(u)).sum())
        .collect();
    let r_oracle = Mat::<c64>::from_fn(j, j, |a, b| (0..gb.len()).map(|n| kb[n][a] * kb[n][b].conj() * (marg[n] * gb.weight(n))).sum());
    let r_lib = link.mode_correlation(Side::Bs, &q_ue).unwrap();
    let e_mode = max_abs_diff(&r_lib, &r_oracle) / max_abs(&r_oracle);

    let rb_oracle = Mat::<c64>::from_fn(3, 3, |a, b| {
        (0..gb.len()).map(|n| pattern(&kb, &q_bs, n, a) * pattern(&kb, &q_bs, n, b).conj() * (marg[n] * gb.weight(n))).sum()
    });
    let rb_direct = link.beam_correlation(&q_bs, &q_ue).unwrap();
    let rb_smc = beam_correlation(&q_bs, &r_lib).unwrap();
    let e_beam = (max_abs_diff(&rb_direct, &rb_oracle).max(max_abs_diff(&rb_smc, &rb_oracle))) / max_abs(&rb_oracle);

    let m = 4;
    let (lam, q) = optimize_side(&link, Side::Bs, &q_ue, m).unwrap();
    let (lo, vo) = jacobi_eigen(&r_oracle);
    let mut e_eig: f64 = 0.0;
    for k in 0..m {
        e_eig = e_eig.max((lam[k] - lo[k]).abs() / lo[0]);
        // Q holds conjugated eigenvectors; compare the spanned directions
        let overlap: c64 = (0..j).map(|i| vo[k][i].conj() * q[(i, k)].conj()).sum();
        e_eig = e_eig.max((1.0 - overlap.norm()).abs());
    }
    let ok = e_mode < 1e-6 && e_beam < 1e-6 && e_eig < 1e-6;
    outcome(ok, format!("mode_correlation {e_mode:.1e}, beam_correlation {e_beam:.1e}, optimize_side {e_eig:.1e} (limit 1e-6)"))
}

fn collect(dir: &Path, base: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            collect(&p, base, out);
        } else {
            out.insert(p.strip_prefix(base).unwrap().to_path_buf(), fs::read(&p).unwrap());
        }
    }
}

/// Byte-identical artifacts across two runs.
fn criterion_9(a: &Path, b: &Path) -> Outcome {
    let (mut fa, mut fb) = (BTreeMap::new(), BTreeMap::new());
    collect(a, a, &mut fa);
    collect(b, b, &mut fb);
    let differing: Vec<_> = fa.iter().filter(|(k, v)| fb.get(*k) != Some(*v)).map(|(k, _)| k.display().to_string()).collect();
    let ok = fa.len() == fb.len() && differing.is_empty() && !fa.is_empty();
    outcome(
        ok,
        format!("{} files, {} differ{}", fa.len(), differing.len(), differing.first().map_or(String::new(), |f| format!(" (first: {f})"))),
    )
}

fn main() {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/paper_baseline.toml");
    let sc = Scenario::load(&cfg).expect("paper_baseline loads");
    let tmp = tempfile::tempdir().expect("temp dir");
    let mut results: Vec<(String, Outcome, f64)> = Vec::new();
    let timed = |id: &str, f: &mut dyn FnMut() -> Outcome, results: &mut Vec<(String, Outcome, f64)>| {
        let t = Instant::now();
        let o = f();
        results.push((id.to_string(), o, t.elapsed().as_secs_f64()));
    };

    let t = Instant::now();
    let first = run_scenario(&sc, &tmp.path().join("a")).expect("paper_baseline run");
    let run_secs = t.elapsed().as_secs_f64();
    let manifest = read_manifest(&first.dir).expect("manifest readable");
    let state: ObpbStateRecord =
        serde_json::from_str(&fs::read_to_string(first.dir.join("obpb/state_m04.json")).unwrap()).expect("M=4 state");
    let q_bs = state.q_bs.to_mat();

    timed("1", &mut criterion_1, &mut results);
    timed("2", &mut || criterion_2(&sc, &q_bs), &mut results);
    timed("3", &mut || criterion_3(&manifest), &mut results);
    let t = Instant::now();
    for (id, o) in criterion_4(&manifest, &first.dir) {
        results.push((id, o, t.elapsed().as_secs_f64()));
    }
    timed("5", &mut || criterion_5(&manifest), &mut results);
    timed("6", &mut || criterion_6(&manifest), &mut results);
    timed("7", &mut || criterion_7(&manifest), &mut results);
    timed("8", &mut criterion_8, &mut results);
    timed(
        "9",
        &mut || {
            let second = run_scenario(&sc, &tmp.path().join("b")).expect("second paper_baseline run");
            criterion_9(&first.dir, &second.dir)
        },
        &mut results,
    );

    println!("paper_baseline run: {run_secs:.1} s");
    let mut failed = 0;
    for (id, o, secs) in &results {
        println!("{} criterion {id}: {} [{secs:.1} s]", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
