//! TOML run configuration for the command-line front end.

use crate::design::default_chi_max;
use crate::error::{Error, Result};
use crate::filtering::{FilterKind, FilterSpec, FilterTable};
use crate::pdc::dispersion::{CrystalAxis, DispersionTable};
use crate::pdc::{symmetric_length, symmetric_pump_slowness, CrystalSpec, PmfKind, PumpSpec, DEFAULT_GAMMA};
use crate::units::{angular_to_wavelength_nm, fwhm_nm_to_sigma, wavelength_nm_to_angular, GridSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub source: SourceConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub schmidt: SchmidtConfig,
    #[serde(default)]
    pub filter: FilterConfig,
    pub herald: Option<HeraldConfig>,
    pub sweep: Option<SweepConfig>,
    pub surface: Option<SurfaceConfig>,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
    #[serde(skip)]
    text: String,
    #[serde(skip)]
    origin: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub pump_wavelength_nm: Option<f64>,
    pub pump_fwhm_nm: Option<f64>,
    pub mu_p: Option<f64>,
    pub sigma_p: Option<f64>,
    pub length_m: Option<f64>,
    pub length_rule: Option<LengthRule>,
    #[serde(default)]
    pub delta0: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_pmf")]
    pub pmf: PmfKind,
    pub slowness: SlownessConfig,
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

fn default_pmf() -> PmfKind {
    PmfKind::Sinc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthRule {
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PumpSlowness {
    #[default]
    Table,
    Symmetric,
    Asymmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlownessConfig {
    /// `"ktp"` for the bundled table, otherwise a path relative to the config file.
    pub table: Option<String>,
    pub pump_axis: Option<CrystalAxis>,
    pub signal_axis: Option<CrystalAxis>,
    pub idler_axis: Option<CrystalAxis>,
    pub signal_wavelength_nm: Option<f64>,
    pub idler_wavelength_nm: Option<f64>,
    #[serde(default)]
    pub pump: PumpSlowness,
    pub kp: Option<f64>,
    pub ks: Option<f64>,
    pub ki: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_points: usize,
    pub span: f64,
    pub center: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchmidtConfig {
    #[serde(default)]
    pub cutoff: f64,
    #[serde(default = "default_modes_out")]
    pub modes_out: usize,
}

fn default_modes_out() -> usize {
    5
}

impl Default for SchmidtConfig {
    fn default() -> Self {
        SchmidtConfig {
            cutoff: 0.0,
            modes_out: default_modes_out(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterName {
    #[default]
    None,
    Gaussian,
    Delta,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    #[serde(default)]
    pub kind: FilterName,
    pub mu_f: Option<f64>,
    pub sigma_f: Option<f64>,
    pub table: Option<PathBuf>,
    #[serde(default = "one")]
    pub eta: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            kind: FilterName::None,
            mu_f: None,
            sigma_f: None,
            table: None,
            eta: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChiValues {
    One(f64),
    Many(Vec<f64>),
}

impl ChiValues {
    pub fn values(&self) -> Vec<f64> {
        match self {
            ChiValues::One(c) => vec![*c],
            ChiValues::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeraldConfig {
    #[serde(default = "default_n")]
    pub n: u8,
    pub chi: Option<ChiValues>,
    pub target_fidelity: Option<f64>,
    pub chi_max: Option<f64>,
}

fn default_n() -> u8 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_n")]
    pub n: u8,
    pub eta: f64,
    pub target_fidelity: f64,
    #[serde(default)]
    pub sigma_f: Vec<f64>,
    #[serde(default = "yes")]
    pub include_delta: bool,
    #[serde(default = "yes")]
    pub include_none: bool,
    pub chi_max: Option<f64>,
    pub mu_f: Option<f64>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    #[serde(default = "default_n")]
    pub n: u8,
    pub chi_max: Option<f64>,
    #[serde(default = "default_points")]
    pub chi_points: usize,
    #[serde(default = "default_points")]
    pub eta_points: usize,
}

fn default_points() -> usize {
    21
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_instances")]
    pub instances: usize,
}

fn default_seed() -> u64 {
    20_260_101
}

fn default_instances() -> usize {
    60
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            seed: default_seed(),
            instances: default_instances(),
        }
    }
}

/// Physical inputs after unit conversion and slowness lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedSource {
    pub pump: PumpSpec,
    pub crystal: CrystalSpec,
    pub grid: GridSpec,
    pub pmf: PmfKind,
}

/// 1-based line of `key` inside `[section]` (top level when `section` is empty).
pub fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if key.is_empty() && current == section {
                return Some(i + 1);
            }
            continue;
        }
        if current == section && !key.is_empty() {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_origin(text, "<config>", Path::new("."))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::parse_with_origin(&text, &path.display().to_string(), &dir)
    }

    fn parse_with_origin(text: &str, origin: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(1);
            Error::Config(format!("{origin}:{line}: {}", e.message()))
        })?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.text = text.to_string();
        cfg.origin = origin.to_string();
        cfg.validate()?;
        Ok(cfg)
    }

    fn fail(&self, section: &str, key: &str, msg: impl std::fmt::Display) -> Error {
        let line = locate(&self.text, section, key)
            .or_else(|| locate(&self.text, section, ""))
            .unwrap_or(1);
        let at = if section.is_empty() {
            key.to_string()
        } else {
            format!("[{section}] {key}")
        };
        Error::Config(format!("{}:{line}: {at}: {msg}", self.origin))
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.source;
        match (
            s.pump_wavelength_nm.is_some() || s.pump_fwhm_nm.is_some(),
            s.mu_p.is_some() || s.sigma_p.is_some(),
        ) {
            (true, true) => {
                return Err(self.fail(
                    "source",
                    "mu_p",
                    "give either pump_wavelength_nm/pump_fwhm_nm or mu_p/sigma_p, not both",
                ))
            }
            (false, false) => return Err(self.fail("source", "", "pump is not specified")),
            (true, false) if s.pump_wavelength_nm.is_none() || s.pump_fwhm_nm.is_none() => {
                return Err(self.fail(
                    "source",
                    "pump_wavelength_nm",
                    "pump_wavelength_nm and pump_fwhm_nm go together",
                ))
            }
            (false, true) if s.mu_p.is_none() || s.sigma_p.is_none() => {
                return Err(self.fail("source", "mu_p", "mu_p and sigma_p go together"))
            }
            _ => {}
        }
        if s.length_m.is_some() == s.length_rule.is_some() {
            return Err(self.fail(
                "source",
                "length_m",
                "exactly one of length_m / length_rule is required",
            ));
        }
        if let Some(l) = s.length_m {
            if !(l > 0.0) {
                return Err(self.fail("source", "length_m", format!("must be positive (got {l})")));
            }
        }
        if !(s.gamma > 0.0) {
            return Err(self.fail("source", "gamma", "must be positive"));
        }
        let k = &s.slowness;
        let explicit = k.ks.is_some() || k.ki.is_some() || k.kp.is_some();
        if explicit == k.table.is_some() {
            return Err(self.fail("source.slowness", "table", "give either a table or explicit kp/ks/ki"));
        }
        if explicit {
            if k.ks.is_none() || k.ki.is_none() {
                return Err(self.fail("source.slowness", "ks", "ks and ki are required"));
            }
            if (k.pump == PumpSlowness::Table) != k.kp.is_some() {
                return Err(self.fail("source.slowness", "kp", "kp is required exactly when pump = \"table\""));
            }
        } else if k.pump_axis.is_none() && k.pump == PumpSlowness::Table
            || k.signal_axis.is_none()
            || k.idler_axis.is_none()
        {
            return Err(self.fail(
                "source.slowness",
                "table",
                "table lookup needs pump_axis, signal_axis and idler_axis",
            ));
        }
        if self.grid.n_points < 2 {
            return Err(self.fail("grid", "n_points", "need at least 2 points"));
        }
        if !(self.grid.span > 0.0) {
            return Err(self.fail("grid", "span", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.schmidt.cutoff) {
            return Err(self.fail("schmidt", "cutoff", "must lie in [0, 1)"));
        }
        let f = &self.filter;
        if !(0.0..=1.0).contains(&f.eta) {
            return Err(self.fail("filter", "eta", format!("must lie in [0, 1] (got {})", f.eta)));
        }
        match f.kind {
            FilterName::Gaussian if !f.sigma_f.is_some_and(|x| x > 0.0) => {
                return Err(self.fail("filter", "sigma_f", "gaussian filter needs a positive sigma_f"))
            }
            FilterName::Table if f.table.is_none() => {
                return Err(self.fail("filter", "table", "table filter needs a table path"))
            }
            _ => {}
        }
        if let Some(h) = &self.herald {
            if h.n != 1 && h.n != 2 {
                return Err(self.fail("herald", "n", "must be 1 or 2"));
            }
            if h.chi.is_some() == h.target_fidelity.is_some() {
                return Err(self.fail("herald", "chi", "exactly one of chi / target_fidelity is required"));
            }
            if let Some(c) = &h.chi {
                if c.values().iter().any(|x| !x.is_finite() || *x < 0.0) || c.values().is_empty() {
                    return Err(self.fail("herald", "chi", "values must be finite and non-negative"));
                }
            }
            if let Some(t) = h.target_fidelity {
                if !(t > 0.0 && t < 1.0) {
                    return Err(self.fail("herald", "target_fidelity", "must lie in (0, 1)"));
                }
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.n != 1 && sw.n != 2 {
                return Err(self.fail("sweep", "n", "must be 1 or 2"));
            }
            if !(0.0..=1.0).contains(&sw.eta) {
                return Err(self.fail("sweep", "eta", "must lie in [0, 1]"));
            }
            if !(sw.target_fidelity > 0.0 && sw.target_fidelity < 1.0) {
                return Err(self.fail("sweep", "target_fidelity", "must lie in (0, 1)"));
            }
            if sw.sigma_f.iter().any(|x| !(*x > 0.0)) {
                return Err(self.fail("sweep", "sigma_f", "widths must be positive"));
            }
            if sw.sigma_f.is_empty() && !sw.include_delta && !sw.include_none {
                return Err(self.fail("sweep", "sigma_f", "no filters to sweep"));
            }
        }
        if let Some(su) = &self.surface {
            if su.n != 1 && su.n != 2 {
                return Err(self.fail("surface", "n", "must be 1 or 2"));
            }
            if su.chi_points < 2 || su.eta_points < 2 {
                return Err(self.fail("surface", "chi_points", "need at least 2 points per axis"));
            }
        }
        if self.oracle.instances == 0 {
            return Err(self.fail("oracle", "instances", "must be positive"));
        }
        Ok(())
    }

    pub fn pump(&self) -> Result<PumpSpec> {
        let s = &self.source;
        match (s.pump_wavelength_nm, s.pump_fwhm_nm) {
            (Some(l), Some(w)) => PumpSpec::new(wavelength_nm_to_angular(l), fwhm_nm_to_sigma(l, w)?),
            _ => PumpSpec::new(s.mu_p.unwrap_or(0.0), s.sigma_p.unwrap_or(0.0)),
        }
        .map_err(|e| self.fail("source", "", e))
    }

    fn dispersion_table(&self, name: &str) -> Result<DispersionTable> {
        if name == "ktp" {
            return Ok(DispersionTable::ktp());
        }
        let path = self.base_dir.join(name);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| self.fail("source.slowness", "table", format!("{}: {e}", path.display())))?;
        DispersionTable::parse(&text).map_err(|e| self.fail("source.slowness", "table", e))
    }

    /// Group slownesses `(kp, ks, ki)`.
    pub fn slowness(&self, pump: &PumpSpec) -> Result<(f64, f64, f64)> {
        let k = &self.source.slowness;
        let (ks, ki, kp_table) = match &k.table {
            None => (k.ks.unwrap_or(0.0), k.ki.unwrap_or(0.0), k.kp),
            Some(name) => {
                let table = self.dispersion_table(name)?;
                let pump_nm = self
                    .source
                    .pump_wavelength_nm
                    .unwrap_or_else(|| angular_to_wavelength_nm(pump.mu_p));
                let signal_nm = k.signal_wavelength_nm.unwrap_or(2.0 * pump_nm);
                let idler_nm = k.idler_wavelength_nm.unwrap_or(2.0 * pump_nm);
                let lookup = |nm: f64, axis: CrystalAxis| {
                    table
                        .slowness(nm, axis)
                        .map_err(|e| self.fail("source.slowness", "table", e))
                };
                let ks = lookup(signal_nm, k.signal_axis.unwrap_or(CrystalAxis::Y))?;
                let ki = lookup(idler_nm, k.idler_axis.unwrap_or(CrystalAxis::Z))?;
                let kp = match (k.pump, k.pump_axis) {
                    (PumpSlowness::Table, Some(axis)) => Some(lookup(pump_nm, axis)?),
                    _ => None,
                };
                (ks, ki, kp)
            }
        };
        let kp = match k.pump {
            PumpSlowness::Table => kp_table.unwrap_or(0.0),
            PumpSlowness::Symmetric => symmetric_pump_slowness(ks, ki),
            PumpSlowness::Asymmetric => ks,
        };
        Ok((kp, ks, ki))
    }

    pub fn resolve(&self) -> Result<ResolvedSource> {
        let pump = self.pump()?;
        let (kp, ks, ki) = self.slowness(&pump)?;
        let length = match (self.source.length_m, self.source.length_rule) {
            (Some(l), _) => l,
            _ => symmetric_length(pump.sigma_p, ks, ki, self.source.gamma)
                .map_err(|e| self.fail("source", "length_rule", e))?,
        };
        let mut crystal = CrystalSpec::new(length, kp, ks, ki).map_err(|e| self.fail("source", "", e))?;
        crystal.delta0 = self.source.delta0;
        crystal.gamma = self.source.gamma;
        let grid = GridSpec::new(
            self.grid.n_points,
            self.grid.span,
            self.grid.center.unwrap_or(pump.mu()),
        )
        .map_err(|e| self.fail("grid", "", e))?;
        Ok(ResolvedSource {
            pump,
            crystal,
            grid,
            pmf: self.source.pmf,
        })
    }

    pub fn filter_spec(&self, grid_center: f64) -> Result<FilterSpec> {
        let f = &self.filter;
        let mu_f = f.mu_f.unwrap_or(grid_center);
        let kind = match f.kind {
            FilterName::None => FilterKind::None,
            FilterName::Gaussian => FilterKind::Gaussian {
                mu_f,
                sigma_f: f.sigma_f.unwrap_or(0.0),
            },
            FilterName::Delta => FilterKind::Delta { mu_f },
            FilterName::Table => {
                let path = self.base_dir.join(f.table.as_deref().unwrap_or(Path::new("")));
                FilterKind::Table(FilterTable::load(&path).map_err(|e| self.fail("filter", "table", e))?)
            }
        };
        FilterSpec::new(kind, f.eta).map_err(|e| self.fail("filter", "", e))
    }

    pub fn herald_chi_max(&self, n: u8, explicit: Option<f64>) -> f64 {
        explicit.unwrap_or_else(|| default_chi_max(n))
    }

    /// SHA-256 over the canonical JSON form plus any referenced table files.
    pub fn hash(&self) -> Result<String> {
        let mut h = Sha256::new();
        h.update(
            serde_json::to_string(self)
                .map_err(|e| Error::Config(e.to_string()))?
                .as_bytes(),
        );
        if let Some(t) = &self.filter.table {
            h.update(std::fs::read(self.base_dir.join(t))?);
        }
        if let Some(t) = self.source.slowness.table.as_deref().filter(|t| *t != "ktp") {
            h.update(std::fs::read(self.base_dir.join(t))?);
        }
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Key identifying the source, grid and cutoff; equal keys give equal decompositions.
    pub fn decomposition_key(&self) -> Result<String> {
        let r = self.resolve()?;
        Ok(format!(
            "{:?}|{:?}|{:?}|{:?}|{:e}",
            r.pump, r.crystal, r.grid, r.pmf, self.schmidt.cutoff
        ))
    }
}
