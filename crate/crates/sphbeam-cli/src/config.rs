//! Scenario files: a TOML tree with the baseline defaults filled in for every
//! omitted key.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sphbeam::angular_profile::{Polarization, ProfileParams};
use sphbeam::conventional::{SelectionMetric, SUBARRAY_CANDIDATES};
use sphbeam::obpb::ObpbConfig;
use sphbeam::surface_projection::{SurfaceKind, DEFAULT_DENSITY, PINV_TOLERANCE};

/// Configuration error with the 1-based line it refers to, when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ObpbOptimal,
    ObpbHemisphere,
    ObpbThirtySecondSphere,
    ObpbPlane,
    FullArrayPower,
    FullArrayDeterminant,
    SubArray,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::ObpbOptimal => "obpb_optimal",
            Method::ObpbHemisphere => "obpb_hemisphere",
            Method::ObpbThirtySecondSphere => "obpb_thirty_second_sphere",
            Method::ObpbPlane => "obpb_plane",
            Method::FullArrayPower => "full_array_power",
            Method::FullArrayDeterminant => "full_array_determinant",
            Method::SubArray => "sub_array",
        }
    }

    pub fn is_obpb(self) -> bool {
        matches!(self, Method::ObpbOptimal | Method::ObpbHemisphere | Method::ObpbThirtySecondSphere | Method::ObpbPlane)
    }

    /// Surface the OBPB patterns are projected on; `None` for the unconstrained optimum.
    pub fn surface(self) -> Option<SurfaceKind> {
        match self {
            Method::ObpbHemisphere => Some(SurfaceKind::Hemisphere),
            Method::ObpbThirtySecondSphere => Some(SurfaceKind::ThirtySecondSphere),
            Method::ObpbPlane => Some(SurfaceKind::Plane),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarizationName {
    Theta,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Power,
    Determinant,
}

impl From<MetricName> for SelectionMetric {
    fn from(m: MetricName) -> Self {
        match m {
            MetricName::Power => SelectionMetric::Power,
            MetricName::Determinant => SelectionMetric::Determinant,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSection {
    pub mean_bs_deg: [f64; 2],
    pub mean_ue_deg: [f64; 2],
    pub sigma_deg: [f64; 4],
    pub corr: [[f64; 4]; 4],
    pub polarization: PolarizationName,
}

impl Default for ProfileSection {
    fn default() -> Self {
        let p = ProfileParams::default();
        Self { mean_bs_deg: p.mean_bs, mean_ue_deg: p.mean_ue, sigma_deg: p.sigma, corr: p.corr, polarization: PolarizationName::Theta }
    }
}

impl ProfileSection {
    pub fn params(&self) -> ProfileParams {
        ProfileParams {
            mean_bs: self.mean_bs_deg,
            mean_ue: self.mean_ue_deg,
            sigma: self.sigma_deg,
            corr: self.corr,
            polarization: match self.polarization {
                PolarizationName::Theta => Polarization::Theta,
                PolarizationName::Both => Polarization::Both,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub bs: [usize; 2],
    pub ue: [usize; 2],
}

impl Default for GridSection {
    fn default() -> Self {
        Self { bs: [96, 192], ue: [48, 96] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AntennaSection {
    /// Enclosing-sphere radii in wavelengths.
    pub r0_bs: f64,
    pub r0_ue: f64,
}

impl Default for AntennaSection {
    fn default() -> Self {
        Self { r0_bs: 4.0 / std::f64::consts::SQRT_2, r0_ue: 1.0 / std::f64::consts::SQRT_2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationSection {
    /// Received SNR of the omni-to-omni SISO link that fixes `P / P_n`.
    pub siso_snr_db: f64,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        Self { siso_snr_db: -12.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObpbSection {
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Largest stream count tried by rank adaptation.
    pub max_streams: usize,
    /// Wall-clock budget per optimization run; 0 means none.
    pub wall_clock_seconds: f64,
}

impl Default for ObpbSection {
    fn default() -> Self {
        let c = ObpbConfig::default();
        Self { epsilon: c.epsilon, max_iterations: c.max_iterations, max_streams: 16, wall_clock_seconds: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurfaceSection {
    /// Current sample points per wavelength.
    pub density: f64,
    pub pinv_tolerance: f64,
    /// Rescale projected SMC columns to unit norm.
    pub renormalize: bool,
}

impl Default for SurfaceSection {
    fn default() -> Self {
        Self { density: DEFAULT_DENSITY, pinv_tolerance: PINV_TOLERANCE, renormalize: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConventionalSection {
    pub bs_rows: usize,
    pub bs_cols: usize,
    /// Element spacing in wavelengths.
    pub spacing: f64,
    pub beam_interval: usize,
    pub subarray_candidates: Vec<[usize; 2]>,
    pub subarray_metric: MetricName,
}

impl Default for ConventionalSection {
    fn default() -> Self {
        Self {
            bs_rows: 8,
            bs_cols: 8,
            spacing: 0.5,
            beam_interval: 4,
            subarray_candidates: SUBARRAY_CANDIDATES.iter().map(|&(v, h)| [v, h]).collect(),
            subarray_metric: MetricName::Determinant,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Stream count of the correlation tables and pattern artifacts.
    pub table_streams: usize,
    /// `N_UE` values that get pattern cuts, 3-D grids and current files.
    pub pattern_n_ue: Vec<usize>,
    pub cut_step_deg: f64,
    pub grid_step_deg: f64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { table_streams: 4, pattern_n_ue: vec![4], cut_step_deg: 1.0, grid_step_deg: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Run directory, relative to the output root unless absolute.
    #[serde(default)]
    pub output_dir: Option<String>,
    pub methods: Vec<Method>,
    pub n_ue: Vec<usize>,
    #[serde(default)]
    pub profile: ProfileSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub antenna: AntennaSection,
    #[serde(default)]
    pub calibration: CalibrationSection,
    #[serde(default)]
    pub obpb: ObpbSection,
    #[serde(default)]
    pub surface: SurfaceSection,
    #[serde(default)]
    pub conventional: ConventionalSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// First line declaring `key` inside `[section]` (top level when `section` is empty).
pub fn line_of(src: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            if key.is_empty() && current == section {
                return Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some(rest) = line.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn line_at(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

impl Scenario {
    pub fn parse(src: &str) -> Result<Self, ConfigError> {
        let sc: Scenario = toml::from_str(src)
            .map_err(|e| ConfigError { line: e.span().map(|s| line_at(src, s.start)), message: e.message().to_string() })?;
        sc.validate(src)?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| ConfigError { line: None, message: format!("cannot read {}: {e}", path.display()) })?;
        Self::parse(&src)
    }

    /// Semantic checks; `src` is only used to anchor messages to lines.
    pub fn validate(&self, src: &str) -> Result<(), ConfigError> {
        let err = |section: &str, key: &str, msg: &str| ConfigError { line: line_of(src, section, key), message: msg.to_string() };
        if self.name.trim().is_empty() {
            return Err(err("", "name", "name must not be empty"));
        }
        if self.methods.is_empty() {
            return Err(err("", "methods", "methods must list at least one method"));
        }
        if self.n_ue.is_empty() {
            return Err(err("", "n_ue", "n_ue must list at least one UE antenna count"));
        }
        if self.n_ue.contains(&0) {
            return Err(err("", "n_ue", "n_ue entries must be positive"));
        }
        if let Err(e) = self.profile.params().validate() {
            let key = if e == sphbeam::Error::InvalidParameter("profile sigmas must be positive") { "sigma_deg" } else { "corr" };
            return Err(err("profile", key, &e.to_string()));
        }
        for (key, g) in [("bs", self.grid.bs), ("ue", self.grid.ue)] {
            if g[0] < 2 || g[1] < 2 {
                return Err(err("grid", key, "grid needs at least 2 nodes in θ and φ"));
            }
        }
        if !(self.antenna.r0_bs > 0.0) {
            return Err(err("antenna", "r0_bs", "r0_bs must be positive"));
        }
        if !(self.antenna.r0_ue > 0.0) {
            return Err(err("antenna", "r0_ue", "r0_ue must be positive"));
        }
        if !self.calibration.siso_snr_db.is_finite() {
            return Err(err("calibration", "siso_snr_db", "siso_snr_db must be finite"));
        }
        if !(self.obpb.epsilon > 0.0) {
            return Err(err("obpb", "epsilon", "epsilon must be positive"));
        }
        if self.obpb.max_iterations == 0 {
            return Err(err("obpb", "max_iterations", "max_iterations must be at least 1"));
        }
        if self.obpb.max_streams == 0 {
            return Err(err("obpb", "max_streams", "max_streams must be at least 1"));
        }
        if !(self.obpb.wall_clock_seconds >= 0.0) {
            return Err(err("obpb", "wall_clock_seconds", "wall_clock_seconds must be nonnegative"));
        }
        if !(self.surface.density > 0.0) {
            return Err(err("surface", "density", "density must be positive"));
        }
        if !(self.surface.pinv_tolerance > 0.0 && self.surface.pinv_tolerance < 1.0) {
            return Err(err("surface", "pinv_tolerance", "pinv_tolerance must lie in (0, 1)"));
        }
        let c = &self.conventional;
        if c.bs_rows == 0 || c.bs_cols == 0 {
            return Err(err("conventional", "bs_rows", "array dimensions must be positive"));
        }
        if !(c.spacing > 0.0) {
            return Err(err("conventional", "spacing", "spacing must be positive"));
        }
        if c.beam_interval == 0 {
            return Err(err("conventional", "beam_interval", "beam_interval must be at least 1"));
        }
        if self.methods.contains(&Method::SubArray) {
            if c.subarray_candidates.is_empty() {
                return Err(err("conventional", "subarray_candidates", "subarray_candidates must not be empty"));
            }
            for &[v, h] in &c.subarray_candidates {
                if v == 0 || h == 0 || !c.bs_rows.is_multiple_of(v) || !c.bs_cols.is_multiple_of(h) {
                    return Err(err("conventional", "subarray_candidates", &format!("sub-array {v}x{h} does not tile the array")));
                }
            }
        }
        let o = &self.output;
        if o.table_streams == 0 {
            return Err(err("output", "table_streams", "table_streams must be at least 1"));
        }
        if o.table_streams > self.obpb.max_streams && self.methods.iter().any(|m| m.is_obpb()) {
            return Err(err("output", "table_streams", "table_streams exceeds obpb.max_streams"));
        }
        if !(o.cut_step_deg > 0.0) {
            return Err(err("output", "cut_step_deg", "cut_step_deg must be positive"));
        }
        if !(o.grid_step_deg > 0.0) {
            return Err(err("output", "grid_step_deg", "grid_step_deg must be positive"));
        }
        Ok(())
    }

    pub fn obpb_config(&self) -> ObpbConfig {
        ObpbConfig { epsilon: self.obpb.epsilon, max_iterations: self.obpb.max_iterations }
    }
}
