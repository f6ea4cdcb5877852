//! Brute-force truncated Fock-space validator.
//!
//! The state is held in three dense sectors: vacuum, one idler photon with one
//! signal photon, and two idler photons with two signal photons. Two-photon
//! registers are indexed by unordered mode pairs `x ≤ y`.

use crate::error::{Error, Result};
use crate::filtering::{fold_detector, FilterKind, FilterSpec, FoldedFilter};
use crate::herald::{HeraldModel, HeraldReport};
use crate::linalg::hermitian_eigen;
use crate::pdc::JsaGrid;
use crate::schmidt::schmidt_decompose;
use crate::units::{Axis, GridSpec};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::SQRT_2;

pub const MAX_BINS: usize = 32;
pub const REL_TOL: f64 = 1e-8;
pub const ABS_FLOOR: f64 = 1e-14;

pub fn pair_count(m: usize) -> usize {
    m * (m + 1) / 2
}

/// Index of the unordered pair `x ≤ y` among `m` modes.
pub fn pair_index(x: usize, y: usize, m: usize) -> usize {
    let (x, y) = if x <= y { (x, y) } else { (y, x) };
    x * m - x * x.saturating_sub(1) / 2 + (y - x)
}

fn pairs(m: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(pair_count(m));
    for x in 0..m {
        for y in x..m {
            out.push((x, y));
        }
    }
    out
}

fn occupation_factor(x: usize, y: usize) -> f64 {
    if x == y {
        SQRT_2
    } else {
        1.0
    }
}

#[derive(Debug, Clone)]
pub struct BinnedState {
    pub n_idler_modes: usize,
    pub n_transmitted: usize,
    pub n_signal: usize,
    pub vacuum: Complex64,
    pub pair: DMatrix<Complex64>,
    pub quad: DMatrix<Complex64>,
}

impl BinnedState {
    pub fn norm_sqr(&self) -> f64 {
        self.vacuum.norm_sqr()
            + self.pair.iter().map(|z| z.norm_sqr()).sum::<f64>()
            + self.quad.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// Weights of zero, one and two photons in the transmitted idler register.
    pub fn sector_probabilities(&self) -> [f64; 3] {
        let nt = self.n_transmitted;
        let mut p = [self.vacuum.norm_sqr(), 0.0, 0.0];
        for x in 0..self.n_idler_modes {
            let w: f64 = self.pair.row(x).iter().map(|z| z.norm_sqr()).sum();
            p[usize::from(x < nt)] += w;
        }
        for (idx, (x, y)) in pairs(self.n_idler_modes).into_iter().enumerate() {
            let w: f64 = self.quad.row(idx).iter().map(|z| z.norm_sqr()).sum();
            p[usize::from(x < nt) + usize::from(y < nt)] += w;
        }
        p
    }
}

/// Second-order state `(1+χ²)|0⟩ + χ Σ F a†b† |0⟩ + (χ²/2)(Σ F a†b†)²|0⟩`, normalized,
/// with `F[i,s] = f[i,s]√(w_i w_s)`.
pub fn build_binned_state(jsa: &JsaGrid, chi: f64) -> Result<BinnedState> {
    let (ni, ns) = (jsa.idler.len(), jsa.signal.len());
    if ni > MAX_BINS || ns > MAX_BINS {
        return Err(Error::InvalidInput(format!(
            "oracle supports at most {MAX_BINS} bins per axis (got {ni}x{ns})"
        )));
    }
    let f = DMatrix::from_fn(ni, ns, |i, s| {
        jsa.amplitude[(i, s)] * (jsa.idler.weights[i] * jsa.signal.weights[s]).sqrt()
    });
    let c2 = chi * chi;
    let ip = pairs(ni);
    let sp = pairs(ns);
    let quad = DMatrix::from_fn(ip.len(), sp.len(), |a, b| {
        let (x, y) = ip[a];
        let (s, t) = sp[b];
        (f[(x, s)] * f[(y, t)] + f[(x, t)] * f[(y, s)]) * c2 / (occupation_factor(x, y) * occupation_factor(s, t))
    });
    let mut state = BinnedState {
        n_idler_modes: ni,
        n_transmitted: ni,
        n_signal: ns,
        vacuum: Complex64::new(1.0 + c2, 0.0),
        pair: f * Complex64::new(chi, 0.0),
        quad,
    };
    let scale = 1.0 / state.norm_sqr().sqrt();
    state.vacuum *= scale;
    state.pair *= Complex64::new(scale, 0.0);
    state.quad *= Complex64::new(scale, 0.0);
    Ok(state)
}

/// `a†_i → T_i c†_i + R_i d†_i` on every idler bin; transmitted modes come first.
pub fn apply_binwise_beamsplitter(state: &BinnedState, folded: &FoldedFilter) -> Result<BinnedState> {
    let n = state.n_idler_modes;
    if state.n_transmitted != n || folded.t.len() != n {
        return Err(Error::InvalidInput(
            "beamsplitter needs an unsplit state and one (T, R) per idler bin".into(),
        ));
    }
    let ns = state.n_signal;
    let m = 2 * n;
    let split = DMatrix::from_fn(m, n, |x, i| {
        if x == i {
            Complex64::new(folded.t[i], 0.0)
        } else if x == n + i {
            Complex64::new(folded.r[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let pair = &split * &state.pair;
    let old_pairs = pairs(n);
    let new_pairs = pairs(m);
    let mut quad = DMatrix::zeros(new_pairs.len(), pair_count(ns));
    let mut sym = DMatrix::<Complex64>::zeros(n, n);
    for col in 0..pair_count(ns) {
        for (a, &(x, y)) in old_pairs.iter().enumerate() {
            let c = state.quad[(a, col)];
            if x == y {
                sym[(x, x)] = c / SQRT_2;
            } else {
                sym[(x, y)] = c / 2.0;
                sym[(y, x)] = c / 2.0;
            }
        }
        let out = &split * &sym * split.transpose();
        for (a, &(x, y)) in new_pairs.iter().enumerate() {
            quad[(a, col)] = if x == y {
                out[(x, x)] * SQRT_2
            } else {
                out[(x, y)] * 2.0
            };
        }
    }
    Ok(BinnedState {
        n_idler_modes: m,
        n_transmitted: n,
        n_signal: ns,
        vacuum: state.vacuum,
        pair,
        quad,
    })
}

/// Heralded signal state: one- and two-photon blocks of a block-diagonal density matrix.
#[derive(Debug, Clone)]
pub struct SignalState {
    pub rho1: DMatrix<Complex64>,
    pub rho2: DMatrix<Complex64>,
}

#[derive(Debug, Clone)]
pub struct HeraldOutcome {
    pub probability: f64,
    pub state: Option<SignalState>,
}

/// Project onto `n` photons in the transmitted idler register and trace out both idler registers.
pub fn herald_and_reduce(state: &BinnedState, n: u8) -> Result<HeraldOutcome> {
    if n != 1 && n != 2 {
        return Err(Error::InvalidInput(format!(
            "herald photon number must be 1 or 2 (got {n})"
        )));
    }
    let nt = state.n_transmitted;
    let ns = state.n_signal;
    let mut rho1 = DMatrix::<Complex64>::zeros(ns, ns);
    let mut rho2 = DMatrix::<Complex64>::zeros(pair_count(ns), pair_count(ns));
    if n == 1 {
        for x in 0..nt {
            let v = state.pair.row(x).transpose();
            rho1 += &v * v.adjoint();
        }
    }
    for (idx, (x, y)) in pairs(state.n_idler_modes).into_iter().enumerate() {
        let clicks = usize::from(x < nt) + usize::from(y < nt);
        if clicks == usize::from(n) {
            let v = state.quad.row(idx).transpose();
            rho2 += &v * v.adjoint();
        }
    }
    let probability = rho1.trace().re + rho2.trace().re;
    if !(probability > 0.0) {
        return Ok(HeraldOutcome {
            probability: 0.0,
            state: None,
        });
    }
    let inv = Complex64::new(1.0 / probability, 0.0);
    Ok(HeraldOutcome {
        probability,
        state: Some(SignalState {
            rho1: rho1 * inv,
            rho2: rho2 * inv,
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleMetrics {
    pub g2: f64,
    pub purity: f64,
    pub fidelity: f64,
}

/// Mode-summed g², Tr ρ², and the best overlap with a single-mode `n`-photon Fock state.
pub fn metrics_from_density_matrix(rho: &SignalState, n: u8) -> OracleMetrics {
    let p1 = rho.rho1.trace().re;
    let p2 = rho.rho2.trace().re;
    let g2 = 2.0 * p2 / (p1 + 2.0 * p2).powi(2);
    let purity = rho.rho1.iter().chain(rho.rho2.iter()).map(|z| z.norm_sqr()).sum();
    let fidelity = if n == 1 {
        hermitian_eigen(&rho.rho1).0.first().copied().unwrap_or(0.0)
    } else {
        two_photon_fidelity(&rho.rho2, rho.rho1.nrows())
    };
    OracleMetrics { g2, purity, fidelity }
}

/// `γ[j,k] = Tr(ρ b†_k b_j)` for a density matrix on the two-photon sector.
pub fn one_body_rdm(rho2: &DMatrix<Complex64>, ns: usize) -> DMatrix<Complex64> {
    let basis = pairs(ns);
    let lower = |&(s, t): &(usize, usize)| -> Vec<(usize, usize, f64)> {
        if s == t {
            vec![(s, s, SQRT_2)]
        } else {
            vec![(s, t, 1.0), (t, s, 1.0)]
        }
    };
    let ann: Vec<Vec<(usize, usize, f64)>> = basis.iter().map(lower).collect();
    let mut gamma = DMatrix::<Complex64>::zeros(ns, ns);
    for a in 0..basis.len() {
        for b in 0..basis.len() {
            let r = rho2[(a, b)];
            if r == Complex64::new(0.0, 0.0) {
                continue;
            }
            for &(j, m, ca) in &ann[a] {
                for &(k, mb, cb) in &ann[b] {
                    if m == mb {
                        gamma[(j, k)] += r * (ca * cb);
                    }
                }
            }
        }
    }
    gamma
}

fn fock2_vector(tau: &[Complex64]) -> Vec<Complex64> {
    let ns = tau.len();
    pairs(ns)
        .into_iter()
        .map(|(s, t)| {
            if s == t {
                tau[s] * tau[s]
            } else {
                tau[s] * tau[t] * SQRT_2
            }
        })
        .collect()
}

fn two_photon_fidelity(rho2: &DMatrix<Complex64>, ns: usize) -> f64 {
    let (_, vecs) = hermitian_eigen(&one_body_rdm(rho2, ns));
    let mut best: f64 = 0.0;
    for m in 0..vecs.ncols() {
        let tau: Vec<Complex64> = vecs.column(m).iter().copied().collect();
        let v = nalgebra::DVector::from_vec(fock2_vector(&tau));
        let f = (v.adjoint() * rho2 * &v)[(0, 0)].re;
        best = best.max(f);
    }
    best
}

/// Full oracle pipeline for one instance.
pub fn oracle_report(jsa: &JsaGrid, filter: &FilterSpec, chi: f64, n: u8) -> Result<(f64, Option<OracleMetrics>)> {
    let state = build_binned_state(jsa, chi)?;
    let split = apply_binwise_beamsplitter(&state, &fold_detector(filter, &jsa.idler))?;
    let outcome = herald_and_reduce(&split, n)?;
    Ok((
        outcome.probability,
        outcome.state.map(|s| metrics_from_density_matrix(&s, n)),
    ))
}

/// Randomized small instance for oracle comparison.
#[derive(Debug, Clone)]
pub struct OracleCase {
    pub index: usize,
    pub jsa: JsaGrid,
    pub modes: usize,
    pub filter: FilterSpec,
    pub chi: f64,
    pub n: u8,
}

impl OracleCase {
    pub fn filter_label(&self) -> &'static str {
        match self.filter.kind {
            FilterKind::None => "none",
            FilterKind::Gaussian { .. } => "gaussian",
            FilterKind::Delta { .. } => "delta",
            FilterKind::Table(_) => "table",
        }
    }
}

fn random_orthonormal(rng: &mut ChaCha8Rng, rows: usize, cols: usize, complex: bool) -> DMatrix<Complex64> {
    let m = DMatrix::from_fn(rows, rows, |_, _| {
        let re = rng.random_range(-1.0..1.0);
        let im = if complex { rng.random_range(-1.0..1.0) } else { 0.0 };
        Complex64::new(re, im)
    });
    m.qr().q().columns(0, cols).into_owned()
}

/// Random coarse JSA of exact Schmidt rank `k` on an `n_bins` grid.
pub fn random_jsa(rng: &mut ChaCha8Rng, n_bins: usize, k: usize, complex: bool) -> Result<JsaGrid> {
    let axis = Axis::from_spec(&GridSpec::new(n_bins, 8e12, 1.2e15)?)?;
    let mut b: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
    b.sort_by(|x, y| y.total_cmp(x));
    let g = random_orthonormal(rng, n_bins, k, complex);
    let h = random_orthonormal(rng, n_bins, k, complex);
    let w = axis.step;
    let amp = DMatrix::from_fn(n_bins, n_bins, |i, s| {
        (0..k).map(|c| g[(i, c)] * h[(s, c)] * b[c]).sum::<Complex64>() / w
    });
    let mut jsa = JsaGrid::new(axis.clone(), axis, amp)?;
    jsa.normalize()?;
    Ok(jsa)
}

pub fn random_case(seed: u64, index: usize) -> Result<OracleCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index as u64);
    let n_bins = rng.random_range(4..=16);
    let modes = rng.random_range(1..=3);
    let complex = rng.random_bool(0.5);
    let jsa = random_jsa(&mut rng, n_bins, modes, complex)?;
    let axis = &jsa.idler;
    let span = axis.samples[n_bins - 1] - axis.samples[0];
    let eta = [0.3, 0.7, 1.0][rng.random_range(0..3)];
    let chi = [0.05, 0.2, 0.4][rng.random_range(0..3)];
    let n = if index.is_multiple_of(2) { 1 } else { 2 };
    let kind = match index % 3 {
        0 => FilterKind::None,
        1 => FilterKind::Gaussian {
            mu_f: axis.center + span * rng.random_range(-0.3..0.3),
            sigma_f: span * rng.random_range(0.08..0.6),
        },
        _ => FilterKind::Delta {
            mu_f: axis.samples[rng.random_range(0..n_bins)],
        },
    };
    Ok(OracleCase {
        index,
        jsa,
        modes,
        filter: FilterSpec::new(kind, eta)?,
        chi,
        n,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricPair {
    pub name: &'static str,
    pub closed: f64,
    pub oracle: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseResult {
    pub index: usize,
    pub n: u8,
    pub filter: &'static str,
    pub eta: f64,
    pub chi: f64,
    pub bins: usize,
    pub modes: usize,
    pub metrics: Vec<MetricPair>,
    pub pass: bool,
}

pub fn agrees(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs()) + ABS_FLOOR
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Closed-form metrics for an oracle case, via the same model selection used by the solvers.
pub fn closed_form_report(case: &OracleCase) -> Result<HeraldReport> {
    let decomp = schmidt_decompose(&case.jsa, 1e-9)?;
    HeraldModel::new(&decomp, &case.filter)?.report(case.chi, case.n)
}

pub fn check_case(case: &OracleCase) -> Result<CaseResult> {
    let closed = closed_form_report(case)?;
    let (p, oracle) = oracle_report(&case.jsa, &case.filter, case.chi, case.n)?;
    let mut metrics = vec![MetricPair {
        name: "probability",
        closed: closed.probability,
        oracle: p,
        rel_err: rel_err(closed.probability, p),
    }];
    let mut pass = agrees(closed.probability, p);
    match (&closed.conditional, oracle) {
        (Some(c), Some(o)) => {
            for (name, a, b) in [
                ("g2", c.g2, o.g2),
                ("purity", c.purity, o.purity),
                ("fidelity", c.fidelity, o.fidelity),
            ] {
                pass &= agrees(a, b);
                metrics.push(MetricPair {
                    name,
                    closed: a,
                    oracle: b,
                    rel_err: rel_err(a, b),
                });
            }
        }
        (None, None) => {}
        _ => pass = false,
    }
    Ok(CaseResult {
        index: case.index,
        n: case.n,
        filter: case.filter_label(),
        eta: case.filter.eta,
        chi: case.chi,
        bins: case.jsa.idler.len(),
        modes: case.modes,
        metrics,
        pass,
    })
}

/// Deterministic randomized suite; results are in instance order.
pub fn run_suite(seed: u64, instances: usize) -> Result<Vec<CaseResult>> {
    (0..instances)
        .into_par_iter()
        .map(|i| check_case(&random_case(seed, i)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rank_one_jsa(n: usize) -> JsaGrid {
        let axis = Axis::from_spec(&GridSpec::new(n, 1.0, 0.0).unwrap()).unwrap();
        let g: Vec<f64> = (0..n).map(|i| (-(i as f64 - 2.0).powi(2) / 3.0).exp()).collect();
        let amp = DMatrix::from_fn(n, n, |i, s| Complex64::new(g[i] * g[s], 0.0));
        let mut jsa = JsaGrid::new(axis.clone(), axis, amp).unwrap();
        jsa.normalize().unwrap();
        jsa
    }

    #[test]
    fn pair_indexing() {
        let m = 5;
        for (idx, (x, y)) in pairs(m).into_iter().enumerate() {
            assert_eq!(pair_index(x, y, m), idx);
            assert_eq!(pair_index(y, x, m), idx);
        }
    }

    #[test]
    fn vacuum_at_zero_chi() {
        let s = build_binned_state(&rank_one_jsa(5), 0.0).unwrap();
        assert_eq!(s.vacuum, Complex64::new(1.0, 0.0));
        assert!(s.pair.iter().chain(s.quad.iter()).all(|z| z.norm() == 0.0));
    }

    #[test]
    fn norm_preserved_by_beamsplitter() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let jsa = random_jsa(&mut rng, 7, 3, true).unwrap();
        let s = build_binned_state(&jsa, 0.3).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        let f = FilterSpec::new(
            FilterKind::Gaussian {
                mu_f: 1.2e15,
                sigma_f: 2e12,
            },
            0.6,
        )
        .unwrap();
        let split = apply_binwise_beamsplitter(&s, &fold_detector(&f, &jsa.idler)).unwrap();
        assert!((split.norm_sqr() - 1.0).abs() < 1e-12);
        let p = split.sector_probabilities();
        let one = herald_and_reduce(&split, 1).unwrap().probability;
        let two = herald_and_reduce(&split, 2).unwrap().probability;
        assert!((p[1] - one).abs() < 1e-15 && (p[2] - two).abs() < 1e-15);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transparent_and_opaque_splitters() {
        let jsa = rank_one_jsa(4);
        let s = build_binned_state(&jsa, 0.2).unwrap();
        let clear = apply_binwise_beamsplitter(&s, &fold_detector(&FilterSpec::none(1.0), &jsa.idler)).unwrap();
        assert!(clear.pair.rows(4, 4).iter().all(|z| z.norm() == 0.0));
        let opaque = apply_binwise_beamsplitter(&s, &fold_detector(&FilterSpec::none(0.0), &jsa.idler)).unwrap();
        let p = opaque.sector_probabilities();
        assert_eq!((p[1], p[2]), (0.0, 0.0));
    }

    #[test]
    fn rank_one_double_pair_is_fock_square() {
        let jsa = rank_one_jsa(5);
        let s = build_binned_state(&jsa, 0.3).unwrap();
        let out = herald_and_reduce(&s, 2).unwrap();
        let m = metrics_from_density_matrix(&out.state.unwrap(), 2);
        assert!((m.purity - 1.0).abs() < 1e-12);
        assert!((m.fidelity - 1.0).abs() < 1e-12);
        assert!((m.g2 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn perfect_single_herald_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let jsa = random_jsa(&mut rng, 6, 2, false).unwrap();
        let d = schmidt_decompose(&jsa, 1e-9).unwrap();
        let s = build_binned_state(&jsa, 1e-3).unwrap();
        let out = herald_and_reduce(&s, 1).unwrap().state.unwrap();
        let (vals, _) = hermitian_eigen(&out.rho1);
        assert!((vals[0] - d.b[0].powi(2)).abs() < 1e-5);
        assert!((vals[1] - d.b[1].powi(2)).abs() < 1e-5);
    }

    #[test]
    fn density_matrix_metrics() {
        let pure = SignalState {
            rho1: DMatrix::from_diagonal_element(3, 3, Complex64::new(0.0, 0.0)) + {
                let mut m = DMatrix::zeros(3, 3);
                m[(1, 1)] = Complex64::new(1.0, 0.0);
                m
            },
            rho2: DMatrix::zeros(6, 6),
        };
        let m = metrics_from_density_matrix(&pure, 1);
        assert_eq!((m.g2, m.purity, m.fidelity), (0.0, 1.0, 1.0));
        let mut rho1 = DMatrix::zeros(2, 2);
        rho1[(0, 0)] = Complex64::new(0.8, 0.0);
        rho1[(1, 1)] = Complex64::new(0.2, 0.0);
        let mixed = SignalState {
            rho1,
            rho2: DMatrix::zeros(3, 3),
        };
        let m = metrics_from_density_matrix(&mixed, 1);
        assert!((m.purity - 0.68).abs() < 1e-15 && (m.fidelity - 0.8).abs() < 1e-15);
    }

    #[test]
    fn signal_basis_independence() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let jsa = random_jsa(&mut rng, 6, 3, true).unwrap();
        let u = random_orthonormal(&mut rng, 6, 6, true);
        let mut rotated = jsa.clone();
        rotated.amplitude = &jsa.amplitude * &u;
        let f = FilterSpec::new(
            FilterKind::Gaussian {
                mu_f: 1.2e15,
                sigma_f: 3e12,
            },
            0.7,
        )
        .unwrap();
        for n in [1u8, 2] {
            let (pa, a) = oracle_report(&jsa, &f, 0.3, n).unwrap();
            let (pb, b) = oracle_report(&rotated, &f, 0.3, n).unwrap();
            let (a, b) = (a.unwrap(), b.unwrap());
            assert!((pa - pb).abs() < 1e-10);
            assert!((a.purity - b.purity).abs() < 1e-10);
            assert!((a.fidelity - b.fidelity).abs() < 1e-10);
            assert!((a.g2 - b.g2).abs() < 1e-10);
        }
    }

    #[test]
    fn too_many_bins() {
        let axis = Axis::from_spec(&GridSpec::new(33, 1.0, 0.0).unwrap()).unwrap();
        let jsa = JsaGrid::new(
            axis.clone(),
            axis,
            DMatrix::from_element(33, 33, Complex64::new(1.0, 0.0)),
        )
        .unwrap();
        assert!(build_binned_state(&jsa, 0.1).is_err());
    }

    #[test]
    fn small_suite_agrees() {
        let results = run_suite(7, 12).unwrap();
        for r in &results {
            assert!(r.pass, "{r:?}");
        }
    }
}
