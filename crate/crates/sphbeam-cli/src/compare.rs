//! Side-by-side table of several run manifests.

use std::io::Write;

use anyhow::{bail, Result};

use crate::artifacts::Manifest;

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub run: String,
    pub method: String,
    pub n_ue: usize,
    pub m_opt: usize,
    pub capacity: f64,
    pub det_db: f64,
    /// `method@run` the ratio refers to.
    pub baseline: String,
    pub capacity_ratio: Option<f64>,
    pub det_db_diff: Option<f64>,
    pub warning: String,
}

/// Rows for every point of every manifest. The baseline of a point is the
/// same `N_UE` in the first manifest, either for the same method or for
/// `baseline_method` when given.
pub fn compare(runs: &[(String, Manifest)], baseline_method: Option<&str>) -> Result<Vec<CompareRow>> {
    if runs.len() < 2 {
        bail!("compare needs at least two manifests");
    }
    let (base_name, base) = &runs[0];
    if let Some(b) = baseline_method {
        if !base.points.iter().any(|p| p.method == b) {
            bail!("baseline method {b} is not in {base_name}");
        }
    }
    let mut rows = Vec::new();
    for (name, m) in runs {
        let mut warn = Vec::new();
        if m.scenario.profile != base.scenario.profile {
            warn.push("profile differs from baseline run");
        }
        if m.scenario.calibration != base.scenario.calibration {
            warn.push("calibration differs from baseline run");
        }
        for p in &m.points {
            let bm = baseline_method.unwrap_or(&p.method);
            let b = base.points.iter().find(|q| q.method == bm && q.n_ue == p.n_ue);
            rows.push(CompareRow {
                run: name.clone(),
                method: p.method.clone(),
                n_ue: p.n_ue,
                m_opt: p.m_opt,
                capacity: p.capacity,
                det_db: p.det_db,
                baseline: format!("{bm}@{base_name}"),
                capacity_ratio: b.map(|b| p.capacity / b.capacity),
                det_db_diff: b.map(|b| p.det_db - b.det_db),
                warning: warn.join("; "),
            });
        }
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(out: W, rows: &[CompareRow]) -> Result<()> {
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["run", "method", "n_ue", "m_opt", "capacity", "det_db", "baseline", "capacity_ratio", "det_db_diff", "warning"])?;
    for r in rows {
        w.write_record([
            r.run.clone(),
            r.method.clone(),
            r.n_ue.to_string(),
            r.m_opt.to_string(),
            format!("{:.6}", r.capacity),
            format!("{:.6}", r.det_db),
            r.baseline.clone(),
            opt(r.capacity_ratio),
            opt(r.det_db_diff),
            r.warning.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
