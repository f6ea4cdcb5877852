//! Fidelity-target solving, filter-width sweeps and metric surfaces.

use crate::error::{Error, Result};
use crate::filtering::{overlap_matrices, FilterKind, FilterSpec, OverlapMatrices};
use crate::herald::{HeraldModel, HeraldReport};
use crate::schmidt::SchmidtDecomposition;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;
use std::sync::{Arc, RwLock};

pub const PROBE_POINTS: usize = 8;
pub const MAX_ITERATIONS: usize = 60;
pub const FIDELITY_TOLERANCE: f64 = 1e-6;
const FLAT_TOLERANCE: f64 = 1e-12;

pub fn default_chi_max(n: u8) -> f64 {
    if n == 2 {
        0.25
    } else {
        0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SolveOutcome {
    Solved {
        chi: f64,
        fidelity: f64,
        iterations: usize,
    },
    /// The target holds on the whole range; the largest allowed χ is returned.
    Saturated {
        chi: f64,
        fidelity: f64,
    },
    ChiIndependent {
        fidelity: f64,
        feasible: bool,
    },
    Unreachable {
        fidelity_at_zero: Option<f64>,
    },
}

impl SolveOutcome {
    /// χ giving the largest herald probability that still meets the target.
    pub fn chi_star(&self, chi_max: f64) -> Option<f64> {
        match self {
            SolveOutcome::Solved { chi, .. } | SolveOutcome::Saturated { chi, .. } => Some(*chi),
            SolveOutcome::ChiIndependent { feasible: true, .. } => Some(chi_max),
            _ => None,
        }
    }
}

fn fidelity_at(model: &HeraldModel, chi: f64, n: u8) -> Result<Option<f64>> {
    Ok(model.report(chi, n)?.fidelity())
}

/// Bisection for `F(χ) = target` on `[0, chi_max]`, after checking that `F` is non-increasing.
pub fn solve_chi(model: &HeraldModel, n: u8, target: f64, chi_max: f64) -> Result<SolveOutcome> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidInput(format!(
            "target fidelity must lie in (0, 1) (got {target})"
        )));
    }
    if !(chi_max > 0.0) {
        return Err(Error::InvalidInput(format!("chi_max must be positive (got {chi_max})")));
    }
    let mut probe = Vec::with_capacity(PROBE_POINTS);
    for j in 0..PROBE_POINTS {
        let chi = chi_max * j as f64 / (PROBE_POINTS - 1) as f64;
        match fidelity_at(model, chi, n)? {
            Some(f) => probe.push(f),
            None => return Ok(SolveOutcome::Unreachable { fidelity_at_zero: None }),
        }
    }
    let f0 = probe[0];
    let hi_f = probe.iter().copied().fold(f64::MIN, f64::max);
    let lo_f = probe.iter().copied().fold(f64::MAX, f64::min);
    if hi_f - lo_f <= FLAT_TOLERANCE {
        return Ok(SolveOutcome::ChiIndependent {
            fidelity: f0,
            feasible: f0 >= target,
        });
    }
    if probe.windows(2).any(|w| w[1] > w[0] + FLAT_TOLERANCE) {
        return Err(Error::NonMonotone { chi_max });
    }
    if f0 < target {
        return Ok(SolveOutcome::Unreachable {
            fidelity_at_zero: Some(f0),
        });
    }
    let f_max = probe[PROBE_POINTS - 1];
    if f_max >= target {
        return Ok(SolveOutcome::Saturated {
            chi: chi_max,
            fidelity: f_max,
        });
    }
    if f0 - target < FIDELITY_TOLERANCE {
        return Ok(SolveOutcome::Solved {
            chi: 0.0,
            fidelity: f0,
            iterations: 0,
        });
    }
    let (mut lo, mut hi) = (0.0, chi_max);
    for it in 1..=MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let f = fidelity_at(model, mid, n)?.ok_or(Error::NotConverged(it))?;
        if f >= target {
            lo = mid;
            if f - target < FIDELITY_TOLERANCE {
                return Ok(SolveOutcome::Solved {
                    chi: mid,
                    fidelity: f,
                    iterations: it,
                });
            }
        } else {
            hi = mid;
        }
    }
    Err(Error::NotConverged(MAX_ITERATIONS))
}

pub fn solve_chi_for_fidelity(
    target: f64,
    eta: f64,
    filter: &FilterKind,
    decomp: &SchmidtDecomposition,
    n: u8,
    chi_max: f64,
) -> Result<SolveOutcome> {
    let model = HeraldModel::new(decomp, &FilterSpec::new(filter.clone(), eta)?)?;
    solve_chi(&model, n, target, chi_max)
}

/// Shared decomposition and unit-efficiency overlap caches.
#[derive(Debug, Default)]
pub struct DesignCache {
    decompositions: RwLock<HashMap<String, Arc<SchmidtDecomposition>>>,
    overlaps: RwLock<HashMap<String, Arc<OverlapMatrices>>>,
}

impl DesignCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn decomposition(
        &self,
        key: &str,
        build: impl FnOnce() -> Result<SchmidtDecomposition>,
    ) -> Result<Arc<SchmidtDecomposition>> {
        if let Some(d) = self.decompositions.read().expect("cache lock").get(key) {
            return Ok(d.clone());
        }
        let d = Arc::new(build()?);
        let mut map = self.decompositions.write().expect("cache lock");
        Ok(map.entry(key.to_string()).or_insert(d).clone())
    }

    /// Overlap matrices at η = 1; other efficiencies follow from [`OverlapMatrices::with_eta`].
    pub fn unit_overlaps(
        &self,
        key: &str,
        decomp: &SchmidtDecomposition,
        kind: &FilterKind,
    ) -> Result<Arc<OverlapMatrices>> {
        let full = format!("{key}|{kind:?}");
        if let Some(o) = self.overlaps.read().expect("cache lock").get(&full) {
            return Ok(o.clone());
        }
        let o = Arc::new(overlap_matrices(decomp, &FilterSpec::new(kind.clone(), 1.0)?)?);
        let mut map = self.overlaps.write().expect("cache lock");
        Ok(map.entry(full).or_insert(o).clone())
    }

    pub fn overlap_entries(&self) -> usize {
        self.overlaps.read().expect("cache lock").len()
    }
}

fn model_for(
    cache: &DesignCache,
    key: &str,
    decomp: &SchmidtDecomposition,
    kind: &FilterKind,
    eta: f64,
) -> Result<HeraldModel> {
    if let FilterKind::None = kind {
        return HeraldModel::new(decomp, &FilterSpec::none(eta));
    }
    let unit = cache.unit_overlaps(key, decomp, kind)?;
    Ok(HeraldModel::from_overlaps(&decomp.b, &unit.with_eta(eta)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SweepFilter {
    Delta,
    Gaussian(f64),
    None,
}

impl SweepFilter {
    fn rank(&self) -> (u8, f64) {
        match self {
            SweepFilter::Delta => (0, 0.0),
            SweepFilter::Gaussian(s) => (1, *s),
            SweepFilter::None => (2, 0.0),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SweepFilter::Delta => "delta",
            SweepFilter::Gaussian(_) => "gaussian",
            SweepFilter::None => "none",
        }
    }

    pub fn sigma_f(&self) -> Option<f64> {
        match self {
            SweepFilter::Gaussian(s) => Some(*s),
            _ => None,
        }
    }

    pub fn kind(&self, mu_f: f64) -> FilterKind {
        match self {
            SweepFilter::Delta => FilterKind::Delta { mu_f },
            SweepFilter::Gaussian(sigma_f) => FilterKind::Gaussian {
                mu_f,
                sigma_f: *sigma_f,
            },
            SweepFilter::None => FilterKind::None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRequest {
    pub key: String,
    pub decomposition: Arc<SchmidtDecomposition>,
    pub n: u8,
    pub eta: f64,
    pub mu_f: f64,
    pub filters: Vec<SweepFilter>,
    pub target: f64,
    pub chi_max: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RowFlags {
    pub unreachable: bool,
    pub chi_independent: bool,
    pub saturated: bool,
    pub non_monotone: bool,
    pub not_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub filter: &'static str,
    pub sigma_f: Option<f64>,
    pub chi_star: Option<f64>,
    pub probability: Option<f64>,
    pub fidelity: Option<f64>,
    pub entropy: f64,
    pub flags: RowFlags,
}

fn sweep_row(req: &SweepRequest, cache: &DesignCache, filter: SweepFilter) -> Result<SweepRow> {
    let decomp = &req.decomposition;
    let mut row = SweepRow {
        filter: filter.label(),
        sigma_f: filter.sigma_f(),
        chi_star: None,
        probability: None,
        fidelity: None,
        entropy: decomp.entropy(),
        flags: RowFlags::default(),
    };
    let model = model_for(cache, &req.key, decomp, &filter.kind(req.mu_f), req.eta)?;
    match solve_chi(&model, req.n, req.target, req.chi_max) {
        Ok(outcome) => {
            match &outcome {
                SolveOutcome::Unreachable { .. } => row.flags.unreachable = true,
                SolveOutcome::ChiIndependent { feasible, .. } => {
                    row.flags.chi_independent = true;
                    row.flags.unreachable = !feasible;
                }
                SolveOutcome::Saturated { .. } => row.flags.saturated = true,
                SolveOutcome::Solved { .. } => {}
            }
            if let Some(chi) = outcome.chi_star(req.chi_max) {
                let rep: HeraldReport = model.report(chi, req.n)?;
                row.chi_star = Some(chi);
                row.probability = Some(rep.probability);
                row.fidelity = rep.fidelity();
            } else if let SolveOutcome::Unreachable { fidelity_at_zero } = outcome {
                row.fidelity = fidelity_at_zero;
            }
        }
        Err(Error::NonMonotone { .. }) => row.flags.non_monotone = true,
        Err(Error::NotConverged(_)) => row.flags.not_converged = true,
        Err(e) => return Err(e),
    }
    Ok(row)
}

/// Rows ordered delta, Gaussian by ascending σ_f, then unfiltered.
pub fn sweep_filter_width(req: &SweepRequest, cache: &DesignCache) -> Result<Vec<SweepRow>> {
    let mut filters = req.filters.clone();
    filters.sort_by(|a, b| {
        let (ra, sa) = a.rank();
        let (rb, sb) = b.rank();
        ra.cmp(&rb).then(sa.total_cmp(&sb))
    });
    filters.par_iter().map(|f| sweep_row(req, cache, *f)).collect()
}

/// Row with the largest probability among those meeting the target.
pub fn best_row(rows: &[SweepRow]) -> Option<&SweepRow> {
    rows.iter()
        .filter(|r| r.probability.is_some())
        .max_by(|a, b| a.probability.unwrap_or(0.0).total_cmp(&b.probability.unwrap_or(0.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceCell {
    pub chi: f64,
    pub eta: f64,
    pub probability: f64,
    pub g2: Option<f64>,
    pub purity: Option<f64>,
    pub fidelity: Option<f64>,
}

/// Metrics on the (η, χ) grid, η outer and χ inner.
pub fn metric_surface(
    chi_grid: &[f64],
    eta_grid: &[f64],
    n: u8,
    key: &str,
    decomp: &SchmidtDecomposition,
    filter: &FilterKind,
    cache: &DesignCache,
) -> Result<Vec<SurfaceCell>> {
    if let Some(e) = eta_grid.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(Error::InvalidInput(format!("eta must lie in [0, 1] (got {e})")));
    }
    let rows: Vec<Vec<SurfaceCell>> = eta_grid
        .par_iter()
        .map(|&eta| {
            let model = model_for(cache, key, decomp, filter, eta)?;
            chi_grid
                .iter()
                .map(|&chi| {
                    let r = model.report(chi, n)?;
                    Ok(SurfaceCell {
                        chi,
                        eta,
                        probability: r.probability,
                        g2: r.g2(),
                        purity: r.purity(),
                        fidelity: r.fidelity(),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdc::JsaGrid;
    use crate::schmidt::schmidt_decompose;
    use crate::units::{Axis, GridSpec};
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    fn decomp() -> SchmidtDecomposition {
        let a = Axis::from_spec(&GridSpec::new(64, 16.0, 0.0).unwrap()).unwrap();
        let n = a.len();
        let amp = DMatrix::from_fn(n, n, |i, s| {
            let (x, y) = (a.samples[i], a.samples[s]);
            Complex64::new((-(x + y) * (x + y) / 8.0 - (x - y) * (x - y) / 2.0).exp(), 0.0)
        });
        let mut jsa = JsaGrid::new(a.clone(), a, amp).unwrap();
        jsa.normalize().unwrap();
        schmidt_decompose(&jsa, 1e-4).unwrap()
    }

    #[test]
    fn perfect_unfiltered_is_chi_independent() {
        let d = decomp();
        let out = solve_chi_for_fidelity(0.5, 1.0, &FilterKind::None, &d, 1, 0.5).unwrap();
        assert!(matches!(out, SolveOutcome::ChiIndependent { .. }));
    }

    #[test]
    fn delta_filter_solves_any_target() {
        let d = decomp();
        let out = solve_chi_for_fidelity(0.95, 0.5, &FilterKind::Delta { mu_f: 0.0 }, &d, 1, 0.5).unwrap();
        let model = HeraldModel::new(&d, &FilterSpec::new(FilterKind::Delta { mu_f: 0.0 }, 0.5).unwrap()).unwrap();
        match out {
            SolveOutcome::Solved { chi, .. } => {
                let f = model.report(chi, 1).unwrap().fidelity().unwrap();
                assert!((f - 0.95).abs() < FIDELITY_TOLERANCE && f >= 0.95);
            }
            SolveOutcome::Saturated { .. } => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(model.report(0.0, 1).unwrap().fidelity().unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn unreachable_target() {
        let d = decomp();
        let out = solve_chi_for_fidelity(0.999, 0.5, &FilterKind::None, &d, 1, 0.5).unwrap();
        assert!(matches!(out, SolveOutcome::Unreachable { .. }));
    }

    #[test]
    fn two_photon_is_feasibility_check() {
        let d = decomp();
        let f = FilterKind::Gaussian {
            mu_f: 0.0,
            sigma_f: 1.0,
        };
        let out = solve_chi_for_fidelity(0.5, 0.7, &f, &d, 2, 0.25).unwrap();
        assert!(matches!(out, SolveOutcome::ChiIndependent { .. }));
    }

    #[test]
    fn rejects_bad_target() {
        let d = decomp();
        assert!(solve_chi_for_fidelity(1.0, 0.5, &FilterKind::None, &d, 1, 0.5).is_err());
    }

    #[test]
    fn sweep_is_ordered_and_matches_serial() {
        let d = Arc::new(decomp());
        let req = SweepRequest {
            key: "t".into(),
            decomposition: d.clone(),
            n: 1,
            eta: 0.5,
            mu_f: 0.0,
            filters: vec![
                SweepFilter::None,
                SweepFilter::Gaussian(2.0),
                SweepFilter::Delta,
                SweepFilter::Gaussian(0.5),
            ],
            target: 0.9,
            chi_max: 0.5,
        };
        let cache = DesignCache::new();
        let rows = sweep_filter_width(&req, &cache).unwrap();
        let labels: Vec<_> = rows.iter().map(|r| (r.filter, r.sigma_f)).collect();
        assert_eq!(
            labels,
            vec![
                ("delta", None),
                ("gaussian", Some(0.5)),
                ("gaussian", Some(2.0)),
                ("none", None)
            ]
        );
        let serial: Vec<SweepRow> = [
            SweepFilter::Delta,
            SweepFilter::Gaussian(0.5),
            SweepFilter::Gaussian(2.0),
            SweepFilter::None,
        ]
        .iter()
        .map(|f| sweep_row(&req, &DesignCache::new(), *f).unwrap())
        .collect();
        assert_eq!(rows, serial);
        assert_eq!(cache.overlap_entries(), 3);
    }

    #[test]
    fn surface_reduces_to_perfect() {
        let d = decomp();
        let cache = DesignCache::new();
        let cells = metric_surface(&[0.0, 0.1, 0.3], &[1.0], 1, "t", &d, &FilterKind::None, &cache).unwrap();
        for c in &cells {
            let p = crate::herald::herald_single_perfect(c.chi, &d.b);
            assert_eq!(c.probability, p.probability);
            assert_eq!(c.g2, Some(0.0));
        }
    }
}
