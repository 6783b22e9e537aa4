//! Runs a scenario end to end and writes its artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use sphbeam::angular_profile::{DirectionGrid, JointProfile, Polarization};
use sphbeam::capacity::{rank_adapt, CapacityReport};
use sphbeam::conventional::{self, best_subarray_partition, full_codebook, select, sub_codebook, Codebook, PlanarArray};
use sphbeam::correlation::{calibrated_snr, det_db, max_off_diagonal, normalize_correlation, siso_power};
use sphbeam::obpb::{self, Link, ObpbState, Side};
use sphbeam::spherical_modes::{far_field_all, truncation_order, ModeSet, TangentField};
use sphbeam::surface_projection::{
    current_samples, sample_surface, transfer_matrix, AntennaSurface, ProjectionOperator, SurfaceKind, SurfaceSampling,
};
use sphbeam::{c64, Mat};

use crate::artifacts::*;
use crate::config::{Method, Scenario};

/// Environment variable overriding the output root directory.
pub const OUTPUT_ROOT_ENV: &str = "SPHBEAM_OUTPUT_ROOT";
pub const DEFAULT_OUTPUT_ROOT: &str = "output";

pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

/// Run directory of `sc` below `root`.
pub fn run_dir(sc: &Scenario, root: &Path) -> PathBuf {
    let d = sc.output_dir.clone().unwrap_or_else(|| sc.name.clone());
    let p = Path::new(&d);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        root.join(p)
    }
}

/// Output root from the environment, or the default.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
}

fn progress(msg: &str) {
    eprintln!("sphbeam: {msg}");
}

/// Something that radiates a set of beam patterns.
enum Radiator<'a> {
    Modes { modes: &'a ModeSet, q: Mat<c64> },
    Array { array: &'a PlanarArray, w: Mat<c64> },
}

impl Radiator<'_> {
    fn streams(&self) -> usize {
        match self {
            Radiator::Modes { q, .. } => q.ncols(),
            Radiator::Array { w, .. } => w.ncols(),
        }
    }

    /// Gain per stream in dBi toward `(theta, phi)`, radians.
    fn gain_db(&self, theta: f64, phi: f64, pol: Polarization) -> Result<Vec<f64>> {
        let power = |f: TangentField| match pol {
            Polarization::Theta => f.theta.norm_sqr(),
            Polarization::Both => f.theta.norm_sqr() + f.phi.norm_sqr(),
        };
        let mut out = Vec::with_capacity(self.streams());
        match self {
            Radiator::Modes { modes, q } => {
                let k = far_field_all(modes, theta, phi);
                for s in 0..q.ncols() {
                    let mut g = TangentField::default();
                    for (j, kj) in k.iter().enumerate() {
                        g.theta += q[(j, s)] * kj.theta;
                        g.phi += q[(j, s)] * kj.phi;
                    }
                    out.push(power(g));
                }
            }
            Radiator::Array { array, w } => {
                for s in 0..w.ncols() {
                    let col: Vec<c64> = (0..w.nrows()).map(|i| w[(i, s)]).collect();
                    out.push(power(conventional::array_beam_pattern(&col, array, theta, phi)?));
                }
            }
        }
        Ok(out.into_iter().map(|p| 10.0 * p.max(1e-30).log10()).collect())
    }
}

fn write_patterns(dir: &Path, rad: &Radiator, pol: Polarization, sc: &Scenario, files: &mut Vec<String>) -> Result<()> {
    let deg = std::f64::consts::PI / 180.0;
    let n = (360.0 / sc.output.cut_step_deg).round().max(1.0) as usize;
    let mut phi_cut = Vec::with_capacity(n + 1);
    let mut theta_cut = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let a = k as f64 * 360.0 / n as f64;
        let phi = a - 180.0;
        phi_cut.push((phi, rad.gain_db(90.0 * deg, phi * deg, pol)?));
        // elevation-plane angle measured from +z through +x
        let (t, p) = if a <= 180.0 { (a, 0.0) } else { (360.0 - a, 180.0) };
        theta_cut.push((a, rad.gain_db(t * deg, p * deg, pol)?));
    }
    write_cut_csv(&dir.join("cuts_phi.csv"), "phi_deg", &phi_cut)?;
    write_cut_csv(&dir.join("cuts_theta.csv"), "alpha_deg", &theta_cut)?;
    let nt = (180.0 / sc.output.grid_step_deg).round().max(1.0) as usize;
    let np = 2 * nt;
    let mut grid = Vec::with_capacity((nt + 1) * np);
    for i in 0..=nt {
        let t = i as f64 * 180.0 / nt as f64;
        for k in 0..np {
            let p = -180.0 + k as f64 * 360.0 / np as f64;
            grid.push((t, p, rad.gain_db(t * deg, p * deg, pol)?));
        }
    }
    write_grid_csv(&dir.join("pattern3d.csv"), &grid)?;
    files.extend(["cuts_phi.csv", "cuts_theta.csv", "pattern3d.csv"].map(String::from));
    Ok(())
}

/// Correlation record at the table stream count.
fn correlation_record(method: Method, n_ue: usize, r: &Mat<c64>, snr: f64) -> Result<CorrelationRecord> {
    let m = r.nrows();
    let raw = det_db(r)?;
    let rn = normalize_correlation(r)?;
    Ok(CorrelationRecord {
        method: method.name().to_string(),
        n_ue,
        streams: m,
        det_db: raw + 10.0 * m as f64 * snr.log10(),
        det_db_uncalibrated: raw,
        max_off_diagonal: max_off_diagonal(&rn),
        normalized: real_rows(&rn),
        matrix: ComplexMatrix::from_mat(r),
    })
}

struct PointData<'a> {
    method: Method,
    n_ue: usize,
    table: CorrelationRecord,
    report: CapacityReport,
    converged: bool,
    subarray: Option<[usize; 2]>,
    subarray_scores: Option<Vec<([usize; 2], f64)>>,
    radiator: Radiator<'a>,
    selection: Option<SelectionRecord>,
    currents: Option<[(&'a SurfaceSampling, Mat<c64>); 2]>,
}

fn write_point(root: &Path, sc: &Scenario, pol: Polarization, p: PointData) -> Result<PointRecord> {
    let rel = PathBuf::from(p.method.name()).join(format!("nue_{}", p.n_ue));
    let dir = root.join(&rel);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files = vec!["correlation.json".to_string(), "correlation.csv".to_string(), "capacity.json".to_string()];
    write_json(&dir.join("correlation.json"), &p.table)?;
    write_correlation_csv(&dir.join("correlation.csv"), &p.table)?;
    write_json(&dir.join("capacity.json"), &CapacityRecord::new(p.method.name(), p.n_ue, &p.report))?;
    if sc.output.pattern_n_ue.contains(&p.n_ue) {
        write_patterns(&dir, &p.radiator, pol, sc, &mut files)?;
        if let Some(sel) = &p.selection {
            write_json(&dir.join("selection.json"), sel)?;
            files.push("selection.json".into());
        }
        if let Some(cur) = &p.currents {
            for ((sampling, a), name) in cur.iter().zip(["currents_bs.csv", "currents_ue.csv"]) {
                let streams = (0..a.ncols()).map(|m| current_samples(sampling, a, m)).collect::<sphbeam::Result<Vec<_>>>()?;
                write_currents_csv(&dir.join(name), &streams)?;
                files.push(name.to_string());
            }
        }
    }
    Ok(PointRecord {
        method: p.method.name().to_string(),
        n_ue: p.n_ue,
        m_opt: p.report.m_opt,
        capacity: p.report.total,
        det_db: p.table.det_db,
        max_off_diagonal: p.table.max_off_diagonal,
        converged: p.converged,
        subarray: p.subarray,
        subarray_scores: p.subarray_scores,
        files: files.into_iter().map(|f| rel.join(f).to_string_lossy().replace('\\', "/")).collect(),
    })
}

fn surface_extent(s: &AntennaSurface) -> f64 {
    match *s {
        AntennaSurface::Plane { side_length, .. } => side_length,
        AntennaSurface::SphereCap { radius, .. } => radius,
    }
}

/// Sampling and projection operator of one side.
struct Projector {
    sampling: SurfaceSampling,
    op: ProjectionOperator,
    extent: f64,
}

impl Projector {
    fn new(kind: SurfaceKind, r0: f64, modes: &ModeSet, sc: &Scenario) -> Result<Self> {
        let surface = AntennaSurface::new(kind, r0)?;
        let sampling = sample_surface(&surface, sc.surface.density)?;
        let op = ProjectionOperator::with_tolerance(transfer_matrix(&sampling, modes), sc.surface.pinv_tolerance)?;
        Ok(Self { sampling, op, extent: surface_extent(&surface) })
    }

    fn project(&self, q: &Mat<c64>, renormalize: bool) -> Result<(Mat<c64>, Mat<c64>, f64)> {
        let p = self.op.project(q)?;
        let res = p.relative_residual(q);
        let p = if renormalize { p.normalized() } else { p };
        Ok((p.q_semi, p.currents, res))
    }

    fn record(&self, method: Method, side: &str, residual: f64) -> SurfaceRecord {
        SurfaceRecord {
            method: method.name().to_string(),
            side: side.to_string(),
            extent: self.extent,
            points: self.sampling.point_count(),
            unknowns: self.sampling.unknowns(),
            rank: self.op.rank(),
            singular_value_max: self.op.sigma.first().copied().unwrap_or(0.0),
            singular_value_min_kept: self.op.sigma.last().copied().unwrap_or(0.0),
            relative_residual: residual,
        }
    }
}

/// Runs `sc`, writing artifacts under `run_dir(sc, root)`.
pub fn run_scenario(sc: &Scenario, root: &Path) -> Result<RunOutcome> {
    let dir = run_dir(sc, root);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let pol = sc.profile.params().polarization;
    let profile = JointProfile::new(sc.profile.params())?;
    let modes_bs = ModeSet::for_radius(sc.antenna.r0_bs);
    let modes_ue = ModeSet::for_radius(sc.antenna.r0_ue);
    let grid_bs = DirectionGrid::new(sc.grid.bs[0], sc.grid.bs[1])?;
    let grid_ue = DirectionGrid::new(sc.grid.ue[0], sc.grid.ue[1])?;
    progress(&format!("link: J_BS={} J_UE={}", modes_bs.mode_count(), modes_ue.mode_count()));
    let link = Link::new(&profile, modes_bs.clone(), modes_ue.clone(), grid_bs, grid_ue);

    let omni_bs = link.omni(Side::Bs);
    let omni_ue = link.omni(Side::Ue);
    let reference = siso_power(&link.bs.power(&omni_bs, pol)?, &link.marginal(Side::Bs, &omni_ue)?, &link.kernel.grid_bs);
    let snr = calibrated_snr(reference, sc.calibration.siso_snr_db);
    let array = PlanarArray::new(sc.conventional.bs_rows, sc.conventional.bs_cols, sc.conventional.spacing)?;
    let table = sc.output.table_streams;

    let mut points = Vec::new();
    let mut surfaces = Vec::new();
    let mut obpb_runs = Vec::new();

    // OBPB: one alternating optimization per candidate stream count
    let mut states: Vec<ObpbState> = Vec::new();
    if sc.methods.iter().any(|m| m.is_obpb()) {
        let m_cap = sc.obpb.max_streams.min(modes_bs.mode_count()).min(modes_ue.mode_count());
        if table > m_cap {
            bail!("table_streams {table} exceeds the {m_cap} available OBPB streams");
        }
        let cfg = sc.obpb_config();
        let deadline = (sc.obpb.wall_clock_seconds > 0.0).then(|| Instant::now() + Duration::from_secs_f64(sc.obpb.wall_clock_seconds));
        let state_dir = dir.join("obpb");
        fs::create_dir_all(&state_dir)?;
        for m in 1..=m_cap {
            let st = obpb::run_with(&link, &cfg, m, &mut || deadline.is_some_and(|d| Instant::now() >= d))?;
            let rec = ObpbRunRecord {
                streams: m,
                iterations: st.iterations,
                converged: st.converged,
                rejected_ue_steps: st.rejected_ue_steps,
                objective_history: st.objective_history.clone(),
                objective_bound: obpb::objective_bound(&link, m)?,
                eigenvalues_bs: st.eigenvalues_bs.clone(),
            };
            progress(&format!("obpb M={m}: {} iterations, converged={}", st.iterations, st.converged));
            write_json(
                &state_dir.join(format!("state_m{m:02}.json")),
                &ObpbStateRecord { run: rec.clone(), q_bs: ComplexMatrix::from_mat(&st.q_bs), q_ue: ComplexMatrix::from_mat(&st.q_ue) },
            )?;
            obpb_runs.push(rec);
            states.push(st);
        }
    }
    let obpb_converged = obpb_runs.iter().all(|r| r.converged);

    let needs_full = sc.methods.iter().any(|m| matches!(m, Method::FullArrayPower | Method::FullArrayDeterminant));
    let full: Option<Codebook> = if needs_full { Some(full_codebook(&array, sc.conventional.beam_interval)?) } else { None };

    for &method in &sc.methods {
        progress(&format!("method {}", method.name()));
        if method.is_obpb() {
            let projectors = match method.surface() {
                Some(kind) => {
                    Some((Projector::new(kind, sc.antenna.r0_bs, &modes_bs, sc)?, Projector::new(kind, sc.antenna.r0_ue, &modes_ue, sc)?))
                }
                None => None,
            };
            let mut family = Vec::with_capacity(states.len());
            let mut table_q = None;
            for st in &states {
                let m = st.q_bs.ncols();
                let (q_bs, q_ue, cur) = match &projectors {
                    Some((pb, pu)) => {
                        let (qb, ab, rb) = pb.project(&st.q_bs, sc.surface.renormalize)?;
                        let (qu, au, ru) = pu.project(&st.q_ue, sc.surface.renormalize)?;
                        if m == table {
                            surfaces.push(pb.record(method, "bs", rb));
                            surfaces.push(pu.record(method, "ue", ru));
                        }
                        (qb, qu, Some((ab, au)))
                    }
                    None => (st.q_bs.clone(), st.q_ue.clone(), None),
                };
                let r = link.beam_correlation(&q_bs, &q_ue)?;
                if m == table {
                    table_q = Some((q_bs, cur));
                }
                family.push(r);
            }
            let report = rank_adapt(&mut |m| Ok(family[m - 1].clone()), family.len(), snr)?;
            let (q_table, cur) = table_q.expect("table stream count was run");
            for &n_ue in &sc.n_ue {
                let rec = correlation_record(method, n_ue, &family[table - 1], snr)?;
                let currents = match (&projectors, &cur) {
                    (Some((pb, pu)), Some((ab, au))) => Some([(&pb.sampling, ab.clone()), (&pu.sampling, au.clone())]),
                    _ => None,
                };
                points.push(write_point(
                    &dir,
                    sc,
                    pol,
                    PointData {
                        method,
                        n_ue,
                        table: rec,
                        report: report.clone(),
                        converged: obpb_converged,
                        subarray: None,
                        subarray_scores: None,
                        radiator: Radiator::Modes { modes: &modes_bs, q: q_table.clone() },
                        selection: None,
                        currents,
                    },
                )?);
            }
            continue;
        }
        for &n_ue in &sc.n_ue {
            let r_elem = conventional::element_correlation_for_ue(&array, &link.kernel, n_ue)?;
            let (cb, sel, report, sub, scores) = match method {
                Method::FullArrayPower | Method::FullArrayDeterminant => {
                    let cb = full.clone().expect("full codebook built");
                    let metric = if method == Method::FullArrayPower {
                        conventional::SelectionMetric::Power
                    } else {
                        conventional::SelectionMetric::Determinant
                    };
                    let m_max = cb.max_streams().min(n_ue);
                    let sel = select(&cb, &r_elem, m_max.max(table.min(cb.max_streams())), metric)?;
                    let report = rank_adapt(&mut |m| conventional::beam_correlation(&cb.columns(&sel.chosen[..m]), &r_elem), m_max, snr)?;
                    (cb, sel, report, None, None)
                }
                Method::SubArray => {
                    let cands: Vec<(usize, usize)> = sc.conventional.subarray_candidates.iter().map(|c| (c[0], c[1])).collect();
                    let metric = sc.conventional.subarray_metric.into();
                    let part = best_subarray_partition(&array, &cands, sc.conventional.beam_interval, &r_elem, n_ue, metric, snr)?;
                    let cb = sub_codebook(&array, part.subarray.0, part.subarray.1, sc.conventional.beam_interval)?;
                    let mut sel = part.result.selection;
                    if sel.chosen.len() < table && cb.max_streams() > sel.chosen.len() {
                        sel = select(&cb, &r_elem, table.min(cb.max_streams()), metric)?;
                    }
                    let scores = part.candidates.iter().map(|&((v, h), c)| ([v, h], c)).collect();
                    (cb, sel, part.result.report, Some([part.subarray.0, part.subarray.1]), Some(scores))
                }
                _ => unreachable!("OBPB handled above"),
            };
            let k = table.min(sel.chosen.len());
            let w = cb.columns(&sel.chosen[..k]);
            let r_table = conventional::beam_correlation(&w, &r_elem)?;
            let rec = correlation_record(method, n_ue, &r_table, snr)?;
            let selection = SelectionRecord {
                metric: format!("{:?}", sel.metric).to_lowercase(),
                chosen: sel.chosen.clone(),
                scores: sel.scores.clone(),
                subarray: sub,
            };
            points.push(write_point(
                &dir,
                sc,
                pol,
                PointData {
                    method,
                    n_ue,
                    table: rec,
                    report,
                    converged: true,
                    subarray: sub,
                    subarray_scores: scores,
                    radiator: Radiator::Array { array: &array, w },
                    selection: Some(selection),
                    currents: None,
                },
            )?);
        }
    }

    write_summary_csv(&dir.join("summary.csv"), &points, table)?;
    let manifest = Manifest {
        name: sc.name.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        scenario: sc.clone(),
        conventions: Conventions::default(),
        derived: Derived {
            truncation_order_bs: truncation_order(sc.antenna.r0_bs),
            truncation_order_ue: truncation_order(sc.antenna.r0_ue),
            modes_bs: modes_bs.mode_count(),
            modes_ue: modes_ue.mode_count(),
            profile_total_power: profile.total_power,
            kernel_active_rows: link.kernel.active_rows(),
            omni_reference_power: reference,
            snr,
            bs_array_radius: array.radius(),
            bs_array_fits: array.radius() <= sc.antenna.r0_bs,
        },
        obpb_runs,
        surfaces,
        points,
        converged: obpb_converged,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(RunOutcome { dir, manifest })
}
