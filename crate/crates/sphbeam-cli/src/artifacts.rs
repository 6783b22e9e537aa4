//! Serializable records and file writers for run artifacts.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sphbeam::capacity::CapacityReport;
use sphbeam::surface_projection::CurrentSample;
use sphbeam::{c64, Mat};

use crate::config::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl ComplexMatrix {
    pub fn from_mat(m: &Mat<c64>) -> Self {
        Self {
            re: (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].re).collect()).collect(),
            im: (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].im).collect()).collect(),
        }
    }

    pub fn to_mat(&self) -> Mat<c64> {
        let n = self.re.len();
        let m = self.re.first().map_or(0, |r| r.len());
        Mat::from_fn(n, m, |i, j| c64::new(self.re[i][j], self.im[i][j]))
    }
}

pub fn real_rows(m: &Mat<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// Beam correlation of one method at one `N_UE`, at the table stream count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRecord {
    pub method: String,
    pub n_ue: usize,
    pub streams: usize,
    /// `10 log10 det(snr · R)`.
    pub det_db: f64,
    /// `10 log10 det(R)` without calibration.
    pub det_db_uncalibrated: f64,
    pub normalized: Vec<Vec<f64>>,
    pub max_off_diagonal: f64,
    /// Beam-space correlation `R` (uncalibrated).
    pub matrix: ComplexMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamEntry {
    pub eigenvalue: f64,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityRecord {
    pub method: String,
    pub n_ue: usize,
    pub m_opt: usize,
    pub total: f64,
    pub snr: f64,
    pub per_stream: Vec<StreamEntry>,
    /// Capacity for `M = 1, 2, ...`.
    pub by_streams: Vec<f64>,
}

impl CapacityRecord {
    pub fn new(method: &str, n_ue: usize, r: &CapacityReport) -> Self {
        Self {
            method: method.to_string(),
            n_ue,
            m_opt: r.m_opt,
            total: r.total,
            snr: r.snr,
            per_stream: r.per_stream.iter().map(|&(eigenvalue, capacity)| StreamEntry { eigenvalue, capacity }).collect(),
            by_streams: r.by_streams.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub metric: String,
    pub chosen: Vec<usize>,
    pub scores: Vec<f64>,
    pub subarray: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObpbRunRecord {
    pub streams: usize,
    pub iterations: usize,
    pub converged: bool,
    pub rejected_ue_steps: usize,
    /// `det(R_BS,h / M)` per half-step, uncalibrated.
    pub objective_history: Vec<f64>,
    pub objective_bound: f64,
    pub eigenvalues_bs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObpbStateRecord {
    #[serde(flatten)]
    pub run: ObpbRunRecord,
    pub q_bs: ComplexMatrix,
    pub q_ue: ComplexMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceRecord {
    pub method: String,
    pub side: String,
    /// Cap radius or plate side length, wavelengths.
    pub extent: f64,
    pub points: usize,
    pub unknowns: usize,
    pub rank: usize,
    pub singular_value_max: f64,
    pub singular_value_min_kept: f64,
    /// `‖q_opt − q_semi‖ / ‖q_opt‖` for the table stream count.
    pub relative_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub method: String,
    pub n_ue: usize,
    pub m_opt: usize,
    pub capacity: f64,
    /// Calibrated determinant at the table stream count.
    pub det_db: f64,
    pub max_off_diagonal: f64,
    pub converged: bool,
    pub subarray: Option<[usize; 2]>,
    /// Best capacity of every sub-array candidate.
    pub subarray_scores: Option<Vec<([usize; 2], f64)>>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub truncation_order_bs: u32,
    pub truncation_order_ue: u32,
    pub modes_bs: usize,
    pub modes_ue: usize,
    pub profile_total_power: f64,
    pub kernel_active_rows: usize,
    /// Omni-to-omni SISO received power, uncalibrated.
    pub omni_reference_power: f64,
    /// `P / P_n`.
    pub snr: f64,
    pub bs_array_radius: f64,
    pub bs_array_fits: bool,
}

/// Fixed numerical conventions that are not scenario keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub truncation_rule: String,
    pub kernel_prune_exponent: f64,
    pub eigen_tie_gap: f64,
    pub capacity_eigen_floor: f64,
    pub selection_tie_tolerance: f64,
    pub initial_pattern: String,
    pub normalized_correlation: String,
    pub transfer_matrix: String,
    pub plane_geometry: String,
    pub cap_geometry: String,
    pub ue_surface: String,
    pub conventional_stream_cap: String,
    pub ue_baseline_spacing: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            truncation_rule: "N = floor(2 pi r0), margin 0".into(),
            kernel_prune_exponent: sphbeam::angular_profile::PRUNE_THRESHOLD,
            eigen_tie_gap: 1e-10,
            capacity_eigen_floor: sphbeam::capacity::EIGEN_FLOOR,
            selection_tie_tolerance: 1e-12,
            initial_pattern: "UE (s=2, m=0, n=1) dipole, one stream".into(),
            normalized_correlation: "|r_ij| / sqrt(|r_ii| |r_jj|)".into(),
            transfer_matrix: "Z[j,l] = (-1)^(s+n) conj(F_j(x_l) . t_l)".into(),
            plane_geometry: "square of side r0*sqrt(2) in the yz plane through the origin".into(),
            cap_geometry: "facing +x, shifted along -x to fit inside r0".into(),
            ue_surface: "same surface kind as the BS at r0_ue".into(),
            conventional_stream_cap: "min(RF chains, N_UE)".into(),
            ue_baseline_spacing: "0.5 / (sqrt(N_UE) - 1) wavelengths".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub version: String,
    pub scenario: Scenario,
    pub conventions: Conventions,
    pub derived: Derived,
    pub obpb_runs: Vec<ObpbRunRecord>,
    pub surfaces: Vec<SurfaceRecord>,
    pub points: Vec<PointRecord>,
    pub converged: bool,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let p = if path.is_dir() { path.join("manifest.json") } else { path.to_path_buf() };
    let s = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
    serde_json::from_str(&s).with_context(|| format!("parsing {}", p.display()))
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt_e(v: f64) -> String {
    format!("{v:.9e}")
}

pub fn write_correlation_csv(path: &Path, rec: &CorrelationRecord) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["i", "j", "re", "im", "normalized"])?;
    for i in 0..rec.streams {
        for j in 0..rec.streams {
            w.write_record([
                (i + 1).to_string(),
                (j + 1).to_string(),
                fmt_e(rec.matrix.re[i][j]),
                fmt_e(rec.matrix.im[i][j]),
                fmt(rec.normalized[i][j]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `angle, stream_1, ...` rows of pattern gains in dB.
pub fn write_cut_csv(path: &Path, angle_name: &str, rows: &[(f64, Vec<f64>)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let streams = rows.first().map_or(0, |r| r.1.len());
    let mut head = vec![angle_name.to_string()];
    head.extend((1..=streams).map(|s| format!("stream_{s}_db")));
    w.write_record(&head)?;
    for (a, v) in rows {
        let mut rec = vec![fmt(*a)];
        rec.extend(v.iter().map(|&x| fmt(x)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `theta_deg, phi_deg, stream_1_db, ...` rows.
pub fn write_grid_csv(path: &Path, rows: &[(f64, f64, Vec<f64>)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let streams = rows.first().map_or(0, |r| r.2.len());
    let mut head = vec!["theta_deg".to_string(), "phi_deg".to_string()];
    head.extend((1..=streams).map(|s| format!("stream_{s}_db")));
    w.write_record(&head)?;
    for (t, p, v) in rows {
        let mut rec = vec![fmt(*t), fmt(*p)];
        rec.extend(v.iter().map(|&x| fmt(x)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_currents_csv(path: &Path, streams: &[Vec<CurrentSample>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["stream", "x", "y", "z", "t1_x", "t1_y", "t1_z", "t2_x", "t2_y", "t2_z", "a1_re", "a1_im", "a2_re", "a2_im"])?;
    for (s, samples) in streams.iter().enumerate() {
        for c in samples {
            let mut rec = vec![(s + 1).to_string()];
            rec.extend(c.position.iter().map(|&v| fmt(v)));
            rec.extend(c.tangents[0].iter().map(|&v| fmt(v)));
            rec.extend(c.tangents[1].iter().map(|&v| fmt(v)));
            rec.extend([c.amplitude[0].re, c.amplitude[0].im, c.amplitude[1].re, c.amplitude[1].im].iter().map(|&v| fmt_e(v)));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv(path: &Path, points: &[PointRecord], table_streams: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["method", "n_ue", "m_opt", "capacity", "det_db", "table_streams", "max_off_diagonal", "subarray"])?;
    for p in points {
        w.write_record([
            p.method.clone(),
            p.n_ue.to_string(),
            p.m_opt.to_string(),
            fmt(p.capacity),
            fmt(p.det_db),
            table_streams.to_string(),
            fmt(p.max_off_diagonal),
            p.subarray.map_or(String::new(), |[v, h]| format!("{v}x{h}")),
        ])?;
    }
    w.flush()?;
    Ok(())
}
