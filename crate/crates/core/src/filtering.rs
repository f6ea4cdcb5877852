//! Heralding-arm spectral filter folded with detector efficiency.

use crate::error::{Error, Result};
use crate::linalg;
use crate::schmidt::SchmidtDecomposition;
use crate::units::Axis;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;

const GS_DROP: f64 = 1e-10;

/// Tabulated amplitude transmission T̃(ω), linearly interpolated and zero outside its range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterTable {
    pub omega: Vec<f64>,
    pub transmission: Vec<f64>,
}

impl FilterTable {
    pub fn new(omega: Vec<f64>, transmission: Vec<f64>) -> Result<Self> {
        if omega.len() != transmission.len() || omega.len() < 2 {
            return Err(Error::InvalidInput(
                "filter table needs at least two (omega, T) rows".into(),
            ));
        }
        if omega.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(
                "filter table frequencies must be strictly increasing".into(),
            ));
        }
        if transmission.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::InvalidInput(
                "filter table transmission must lie in [0, 1]".into(),
            ));
        }
        Ok(FilterTable { omega, transmission })
    }

    /// Two whitespace-separated columns: ω in s⁻¹ and T̃. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut omega = Vec::new();
        let mut transmission = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            let parsed = (cols.len() == 2)
                .then(|| Some((cols[0].parse::<f64>().ok()?, cols[1].parse::<f64>().ok()?)))
                .flatten();
            let (w, t) = parsed.ok_or_else(|| {
                Error::Config(format!(
                    "filter table line {}: expected two numeric columns",
                    lineno + 1
                ))
            })?;
            omega.push(w);
            transmission.push(t);
        }
        Self::new(omega, transmission)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn interpolate(&self, w: f64) -> f64 {
        let n = self.omega.len();
        if w < self.omega[0] || w > self.omega[n - 1] {
            return 0.0;
        }
        let j = self.omega.partition_point(|x| *x <= w).clamp(1, n - 1);
        let (x0, x1) = (self.omega[j - 1], self.omega[j]);
        let (y0, y1) = (self.transmission[j - 1], self.transmission[j]);
        y0 + (y1 - y0) * (w - x0) / (x1 - x0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FilterKind {
    None,
    Gaussian { mu_f: f64, sigma_f: f64 },
    Delta { mu_f: f64 },
    Table(FilterTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub eta: f64,
}

impl FilterSpec {
    pub fn new(kind: FilterKind, eta: f64) -> Result<Self> {
        let f = FilterSpec { kind, eta };
        f.validate()?;
        Ok(f)
    }

    pub fn none(eta: f64) -> Self {
        FilterSpec {
            kind: FilterKind::None,
            eta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidInput(format!(
                "eta must lie in [0, 1] (got {})",
                self.eta
            )));
        }
        if let FilterKind::Gaussian { sigma_f, .. } = self.kind {
            if !(sigma_f > 0.0) {
                return Err(Error::InvalidInput(format!("sigma_f must be positive (got {sigma_f})")));
            }
        }
        Ok(())
    }

    pub fn is_unfiltered(&self) -> bool {
        matches!(self.kind, FilterKind::None)
    }
}

/// Amplitude transmission T̃(ω) before folding; `Delta` is resolved per axis in [`fold_detector`].
pub fn filter_transmission(kind: &FilterKind, w: f64) -> f64 {
    match kind {
        FilterKind::None => 1.0,
        FilterKind::Gaussian { mu_f, sigma_f } => {
            let d = w - mu_f;
            (-d * d / (2.0 * sigma_f * sigma_f)).exp()
        }
        FilterKind::Delta { mu_f } => {
            if w == *mu_f {
                1.0
            } else {
                0.0
            }
        }
        FilterKind::Table(t) => t.interpolate(w),
    }
}

/// Effective beamsplitter amplitudes per idler sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldedFilter {
    pub t: Vec<f64>,
    pub r: Vec<f64>,
}

/// `T = T̃√η`, `R = √(1 − T̃²η)` on the idler axis. A delta filter transmits only
/// the sample nearest to its center.
pub fn fold_detector(filter: &FilterSpec, axis: &Axis) -> FoldedFilter {
    let se = filter.eta.sqrt();
    let tt: Vec<f64> = match &filter.kind {
        FilterKind::Delta { mu_f } => {
            let j0 = axis.nearest_index(*mu_f);
            (0..axis.len()).map(|j| if j == j0 { 1.0 } else { 0.0 }).collect()
        }
        kind => axis.samples.iter().map(|w| filter_transmission(kind, *w)).collect(),
    };
    let t: Vec<f64> = tt.iter().map(|x| x * se).collect();
    let r = t.iter().map(|x| (1.0 - x * x).max(0.0).sqrt()).collect();
    FoldedFilter { t, r }
}

#[derive(Debug, Clone)]
pub struct OverlapMatrices {
    pub tmat: DMatrix<Complex64>,
    pub rmat: DMatrix<Complex64>,
    pub gram: DMatrix<Complex64>,
    pub t_diag: Vec<f64>,
    pub r_diag: Vec<f64>,
}

impl OverlapMatrices {
    fn from_parts(tmat: DMatrix<Complex64>, gram: DMatrix<Complex64>) -> Self {
        let rmat = &gram - &tmat;
        let t_diag = tmat.diagonal().iter().map(|z| z.re.max(0.0).sqrt()).collect();
        let r_diag = rmat.diagonal().iter().map(|z| z.re.max(0.0).sqrt()).collect();
        OverlapMatrices {
            tmat,
            rmat,
            gram,
            t_diag,
            r_diag,
        }
    }

    /// Frequency-independent loss: `T = ηI`, `R = (1−η)I`.
    pub fn uniform(k: usize, eta: f64) -> Self {
        let eye = DMatrix::<Complex64>::identity(k, k);
        Self::from_parts(&eye * Complex64::new(eta, 0.0), eye)
    }

    /// Matrices for efficiency `eta`, given matrices computed at unit efficiency.
    pub fn with_eta(&self, eta: f64) -> Self {
        Self::from_parts(&self.tmat * Complex64::new(eta, 0.0), self.gram.clone())
    }

    pub fn len(&self) -> usize {
        self.tmat.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.tmat.nrows() == 0
    }
}

/// `Tmat[k,k'] = Σ_j w_j |T_j|² ζ_k(j) ζ_k'*(j)` and `Rmat` likewise with `|R|²`.
pub fn overlap_matrices(decomp: &SchmidtDecomposition, filter: &FilterSpec) -> Result<OverlapMatrices> {
    filter.validate()?;
    if let FilterKind::None = filter.kind {
        let gram = linalg::weighted_overlap(&decomp.zeta, &decomp.idler.weights);
        let tmat = &gram * Complex64::new(filter.eta, 0.0);
        return Ok(OverlapMatrices::from_parts(tmat, gram));
    }
    let folded = fold_detector(filter, &decomp.idler);
    overlap_from_folded(decomp, &folded)
}

pub fn overlap_from_folded(decomp: &SchmidtDecomposition, folded: &FoldedFilter) -> Result<OverlapMatrices> {
    let axis = &decomp.idler;
    if folded.t.len() != axis.len() {
        return Err(Error::AxisMismatch(format!(
            "filter has {} samples, idler axis has {}",
            folded.t.len(),
            axis.len()
        )));
    }
    let gram = linalg::weighted_overlap(&decomp.zeta, &axis.weights);
    let wt: Vec<f64> = axis.weights.iter().zip(&folded.t).map(|(w, t)| w * t * t).collect();
    let tmat = linalg::weighted_overlap(&decomp.zeta, &wt);
    Ok(OverlapMatrices::from_parts(tmat, gram))
}

/// Orthonormal basis `phi` (columns) of the filtered idler modes `T ζ_k`, with
/// `u[k, j] = ⟨φ_j, T ζ_k⟩`.
#[derive(Debug, Clone)]
pub struct FilteredModes {
    pub phi: DMatrix<Complex64>,
    pub u: DMatrix<Complex64>,
    pub rank: usize,
}

/// Modified Gram–Schmidt with one re-orthogonalization pass, in Schmidt order.
pub fn gram_schmidt(vectors: &DMatrix<Complex64>, weights: &[f64]) -> FilteredModes {
    let (n, k) = vectors.shape();
    let inner = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
        a.iter().zip(b).zip(weights).map(|((x, y), w)| x.conj() * y * *w).sum()
    };
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    for c in 0..k {
        let original: Vec<Complex64> = vectors.column(c).iter().copied().collect();
        let norm0 = inner(&original, &original).re.sqrt();
        if norm0 == 0.0 {
            continue;
        }
        let mut v = original;
        for _pass in 0..2 {
            for phi in &basis {
                let proj = inner(phi, &v);
                for (x, p) in v.iter_mut().zip(phi) {
                    *x -= proj * p;
                }
            }
        }
        let norm = inner(&v, &v).re.sqrt();
        if norm < GS_DROP * norm0 {
            continue;
        }
        basis.push(v.iter().map(|x| x / norm).collect());
    }
    let rank = basis.len();
    let phi = DMatrix::from_fn(n, rank, |i, j| basis[j][i]);
    let u = DMatrix::from_fn(k, rank, |c, j| {
        let col: Vec<Complex64> = vectors.column(c).iter().copied().collect();
        inner(&basis[j], &col)
    });
    FilteredModes { phi, u, rank }
}

/// Orthogonalized transmitted and reflected idler modes.
pub fn orthogonalize_filtered_modes(
    decomp: &SchmidtDecomposition,
    filter: &FilterSpec,
) -> Result<(FilteredModes, FilteredModes)> {
    filter.validate()?;
    let folded = fold_detector(filter, &decomp.idler);
    let mut tz = decomp.zeta.clone();
    let mut rz = decomp.zeta.clone();
    for j in 0..decomp.idler.len() {
        tz.row_mut(j).scale_mut(folded.t[j]);
        rz.row_mut(j).scale_mut(folded.r[j]);
    }
    Ok((
        gram_schmidt(&tz, &decomp.idler.weights),
        gram_schmidt(&rz, &decomp.idler.weights),
    ))
}

/// Eigen-decomposition of `M = diag(b)·Tmat·diag(b)`; columns of `coeffs` hold `c_mk`.
#[derive(Debug, Clone)]
pub struct DiagonalModeSpectrum {
    pub lambda: Vec<f64>,
    pub coeffs: DMatrix<Complex64>,
}

impl DiagonalModeSpectrum {
    pub fn max_lambda(&self) -> f64 {
        self.lambda.first().copied().unwrap_or(0.0)
    }
}

pub fn weighted_by_b(b: &[f64], mat: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(b.len(), b.len(), |k, l| mat[(k, l)] * (b[k] * b[l]))
}

pub fn diagonalize_signal(b: &[f64], tmat: &DMatrix<Complex64>) -> DiagonalModeSpectrum {
    let m = weighted_by_b(b, tmat);
    let (vals, coeffs) = linalg::hermitian_eigen(&m);
    DiagonalModeSpectrum {
        lambda: vals.into_iter().map(|l| l.max(0.0)).collect(),
        coeffs,
    }
}

/// Diagonal signal modes τ_m sampled on the signal axis, first `count` of them.
pub fn signal_modes(decomp: &SchmidtDecomposition, diag: &DiagonalModeSpectrum, count: usize) -> DMatrix<Complex64> {
    let count = count.min(diag.coeffs.ncols());
    &decomp.xi * diag.coeffs.columns(0, count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdc::JsaGrid;
    use crate::schmidt::schmidt_decompose;
    use crate::units::GridSpec;

    fn decomp() -> SchmidtDecomposition {
        let a = Axis::from_spec(&GridSpec::new(48, 12.0, 0.0).unwrap()).unwrap();
        let n = a.len();
        let amp = DMatrix::from_fn(n, n, |i, s| {
            let (x, y) = (a.samples[i], a.samples[s]);
            Complex64::new(
                (-(x + y) * (x + y) / 2.0 - (x - y) * (x - y) / 8.0).exp(),
                0.1 * x * (-x * x).exp(),
            )
        });
        let mut jsa = JsaGrid::new(a.clone(), a, amp).unwrap();
        jsa.normalize().unwrap();
        schmidt_decompose(&jsa, 1e-3).unwrap()
    }

    fn close(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>, tol: f64) -> bool {
        linalg::max_abs_diff(a, b) < tol
    }

    #[test]
    fn folding_examples() {
        let a = Axis::from_spec(&GridSpec::new(3, 2.0, 0.0).unwrap()).unwrap();
        let f = fold_detector(&FilterSpec::none(1.0), &a);
        assert_eq!(f.t, vec![1.0; 3]);
        assert_eq!(f.r, vec![0.0; 3]);
        let f = fold_detector(&FilterSpec::none(0.5), &a);
        assert!(f.t.iter().chain(&f.r).all(|x| (x - 0.5f64.sqrt()).abs() < 1e-15));
        let blocked = FilterTable::new(vec![0.5, 2.0], vec![1.0, 1.0]).unwrap();
        let f = fold_detector(&FilterSpec::new(FilterKind::Table(blocked), 1.0).unwrap(), &a);
        assert_eq!((f.t[0], f.r[0]), (0.0, 1.0));
    }

    #[test]
    fn unfiltered_overlaps() {
        let d = decomp();
        let o = overlap_matrices(&d, &FilterSpec::none(0.3)).unwrap();
        let eye = DMatrix::<Complex64>::identity(d.len(), d.len());
        assert!(close(&o.tmat, &(&eye * Complex64::new(0.3, 0.0)), 1e-8));
        assert!(close(&o.rmat, &(&eye * Complex64::new(0.7, 0.0)), 1e-8));
    }

    #[test]
    fn gaussian_overlaps_hermitian_and_complete() {
        let d = decomp();
        let f = FilterSpec::new(
            FilterKind::Gaussian {
                mu_f: 0.7,
                sigma_f: 1.1,
            },
            0.8,
        )
        .unwrap();
        let o = overlap_matrices(&d, &f).unwrap();
        assert!(close(&o.tmat, &o.tmat.adjoint(), 1e-14));
        let eye = DMatrix::<Complex64>::identity(d.len(), d.len());
        assert!(close(&(&o.tmat + &o.rmat), &eye, 1e-8));
        for k in 0..d.len() {
            assert!(o.tmat[(k, k)].re >= 0.0 && o.tmat[(k, k)].re <= 0.8 + 1e-12);
            assert!((o.t_diag[k].powi(2) - o.tmat[(k, k)].re).abs() < 1e-14);
        }
    }

    #[test]
    fn delta_is_rank_one() {
        let d = decomp();
        let f = FilterSpec::new(FilterKind::Delta { mu_f: 0.3 }, 1.0).unwrap();
        let o = overlap_matrices(&d, &f).unwrap();
        let diag = diagonalize_signal(&d.b, &o.tmat);
        assert!(diag.lambda[0] > 0.0);
        assert!(diag.lambda[1..].iter().all(|l| *l < 1e-15));
    }

    #[test]
    fn wide_gaussian_approaches_unfiltered() {
        let d = decomp();
        let f = FilterSpec::new(
            FilterKind::Gaussian {
                mu_f: 0.0,
                sigma_f: 1e5,
            },
            0.6,
        )
        .unwrap();
        let o = overlap_matrices(&d, &f).unwrap();
        let u = overlap_matrices(&d, &FilterSpec::none(0.6)).unwrap();
        assert!(close(&o.tmat, &u.tmat, 1e-8));
    }

    #[test]
    fn gram_schmidt_reproduces_overlaps() {
        let d = decomp();
        let f = FilterSpec::new(
            FilterKind::Gaussian {
                mu_f: -0.4,
                sigma_f: 0.9,
            },
            0.7,
        )
        .unwrap();
        let o = overlap_matrices(&d, &f).unwrap();
        let (t, _) = orthogonalize_filtered_modes(&d, &f).unwrap();
        let g = linalg::weighted_overlap(&t.phi, &d.idler.weights);
        assert!(close(&g, &DMatrix::identity(t.rank, t.rank), 1e-8));
        let uu = DMatrix::from_fn(d.len(), d.len(), |k, l| {
            (0..t.rank).map(|j| t.u[(k, j)] * t.u[(l, j)].conj()).sum::<Complex64>()
        });
        assert!(close(&uu, &o.tmat, 1e-8));
        let folded = fold_detector(&f, &d.idler);
        let rebuilt = &t.phi * t.u.transpose();
        for k in 0..d.len() {
            for j in 0..d.idler.len() {
                assert!((rebuilt[(j, k)] - d.zeta[(j, k)] * folded.t[j]).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn unfiltered_modes_are_schmidt_modes() {
        let d = decomp();
        let (t, r) = orthogonalize_filtered_modes(&d, &FilterSpec::none(0.5)).unwrap();
        assert_eq!(t.rank, d.len());
        assert!(close(&t.phi, &d.zeta, 1e-8));
        let expect = DMatrix::<Complex64>::identity(d.len(), d.len()) * Complex64::new(0.5f64.sqrt(), 0.0);
        assert!(close(&t.u, &expect, 1e-8));
        assert_eq!(r.rank, d.len());
    }

    #[test]
    fn duplicate_vectors_collapse() {
        let w = vec![1.0; 4];
        let v = DMatrix::from_fn(4, 2, |i, _| Complex64::new(i as f64 + 1.0, 0.0));
        let m = gram_schmidt(&v, &w);
        assert_eq!(m.rank, 1);
    }

    #[test]
    fn diagonal_spectrum_examples() {
        let b = [0.8f64.sqrt(), 0.2f64.sqrt()];
        let diag = diagonalize_signal(&b, &DMatrix::identity(2, 2));
        assert!((diag.lambda[0] - 0.8).abs() < 1e-15 && (diag.lambda[1] - 0.2).abs() < 1e-15);
        let t = DMatrix::<Complex64>::identity(2, 2) * Complex64::new(0.4, 0.0);
        let diag = diagonalize_signal(&b, &t);
        assert!((diag.lambda[0] - 0.32).abs() < 1e-15);
        assert!((diag.coeffs[(0, 0)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn regauging_preserves_spectrum() {
        let d = decomp();
        let f = FilterSpec::new(
            FilterKind::Gaussian {
                mu_f: 0.2,
                sigma_f: 0.8,
            },
            0.9,
        )
        .unwrap();
        let a = diagonalize_signal(&d.b, &overlap_matrices(&d, &f).unwrap().tmat);
        let theta: Vec<f64> = (0..d.len()).map(|k| 0.7 * k as f64 + 0.3).collect();
        let g = d.regauged(&theta);
        let b = diagonalize_signal(&g.b, &overlap_matrices(&g, &f).unwrap().tmat);
        for (x, y) in a.lambda.iter().zip(&b.lambda) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn table_interpolation() {
        let t = FilterTable::parse("# w T\n0 0\n2 1\n4 0.5\n").unwrap();
        assert_eq!(t.interpolate(1.0), 0.5);
        assert_eq!(t.interpolate(3.0), 0.75);
        assert_eq!(t.interpolate(-1.0), 0.0);
        assert_eq!(t.interpolate(4.5), 0.0);
        assert_eq!(t.interpolate(4.0), 0.5);
        assert!(FilterTable::parse("0 2\n1 0.5").is_err());
        assert!(FilterTable::parse("1 0\n0 1").is_err());
    }
}
