//! Discrete Schmidt decomposition of a sampled JSA.

use crate::error::{Error, Result};
use crate::linalg;
use crate::pdc::JsaGrid;
use crate::units::Axis;
use nalgebra::DMatrix;
use num_complex::Complex64;

const TIE_TOLERANCE: f64 = 1e-12;

/// `f(ω_i, ω_s) = Σ_k b_k ζ_k(ω_i) ξ_k(ω_s)`; modes are stored as matrix columns.
#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    pub b: Vec<f64>,
    pub zeta: DMatrix<Complex64>,
    pub xi: DMatrix<Complex64>,
    pub idler: Axis,
    pub signal: Axis,
    pub cutoff: f64,
    pub total_modes: usize,
    pub truncated: bool,
}

impl SchmidtDecomposition {
    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    pub fn entropy(&self) -> f64 {
        entropy_of_entanglement(&self.b)
    }

    pub fn retained_weight(&self) -> f64 {
        self.b.iter().map(|x| x * x).sum()
    }

    /// Copy with ζ_k → e^{iθ_k} ζ_k and ξ_k → e^{−iθ_k} ξ_k.
    pub fn regauged(&self, theta: &[f64]) -> Self {
        let mut out = self.clone();
        for (k, t) in theta.iter().enumerate().take(self.len()) {
            let p = Complex64::from_polar(1.0, *t);
            for z in out.zeta.column_mut(k).iter_mut() {
                *z *= p;
            }
            for x in out.xi.column_mut(k).iter_mut() {
                *x *= p.conj();
            }
        }
        out
    }

    /// Copy keeping only the leading `k` modes.
    pub fn leading(&self, k: usize) -> Self {
        let k = k.min(self.len());
        SchmidtDecomposition {
            b: self.b[..k].to_vec(),
            zeta: self.zeta.columns(0, k).into_owned(),
            xi: self.xi.columns(0, k).into_owned(),
            idler: self.idler.clone(),
            signal: self.signal.clone(),
            cutoff: self.cutoff,
            total_modes: self.total_modes,
            truncated: self.truncated || k < self.len(),
        }
    }
}

pub fn entropy_of_entanglement(b: &[f64]) -> f64 {
    b.iter()
        .map(|x| x * x)
        .filter(|p| *p > 0.0)
        .map(|p| -p * p.log2())
        .sum::<f64>()
        .max(0.0)
}

pub fn schmidt_decompose(jsa: &JsaGrid, cutoff: f64) -> Result<SchmidtDecomposition> {
    if !(0.0..1.0).contains(&cutoff) {
        return Err(Error::InvalidInput(format!("cutoff must lie in [0, 1) (got {cutoff})")));
    }
    let (ni, ns) = (jsa.idler.len(), jsa.signal.len());
    let sw_i: Vec<f64> = jsa.idler.weights.iter().map(|w| w.sqrt()).collect();
    let sw_s: Vec<f64> = jsa.signal.weights.iter().map(|w| w.sqrt()).collect();
    let scaled = DMatrix::from_fn(ni, ns, |i, s| jsa.amplitude[(i, s)] * (sw_i[i] * sw_s[s]));
    let (u, sv, vt) = linalg::svd(&scaled)?;

    let weight: f64 = sv.iter().map(|x| x * x).sum();
    if (weight - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized(weight));
    }

    let kmax = sv.len();
    let mut zeta = DMatrix::from_fn(ni, kmax, |i, k| u[(i, k)] / sw_i[i]);
    let mut xi = DMatrix::from_fn(ns, kmax, |s, k| vt[(k, s)] / sw_s[s]);
    for k in 0..kmax {
        let mut jmax = 0;
        let mut amax = -1.0;
        for (j, z) in zeta.column(k).iter().enumerate() {
            let a = z.norm();
            if a > amax {
                amax = a;
                jmax = j;
            }
        }
        if amax > 0.0 {
            let p = zeta[(jmax, k)] / amax;
            for z in zeta.column_mut(k).iter_mut() {
                *z *= p.conj();
            }
            zeta[(jmax, k)] = Complex64::new(zeta[(jmax, k)].re, 0.0);
            for x in xi.column_mut(k).iter_mut() {
                *x *= p;
            }
        }
    }

    let order = ordering(&sv, &zeta, &jsa.idler);
    let keep: Vec<usize> = order.into_iter().filter(|&k| sv[k] >= cutoff).collect();
    if keep.is_empty() {
        return Err(Error::EmptyDecomposition(cutoff));
    }
    let b: Vec<f64> = keep.iter().map(|&k| sv[k]).collect();
    let zeta = DMatrix::from_fn(ni, keep.len(), |i, c| zeta[(i, keep[c])]);
    let xi = DMatrix::from_fn(ns, keep.len(), |s, c| xi[(s, keep[c])]);
    Ok(SchmidtDecomposition {
        truncated: keep.len() < kmax,
        b,
        zeta,
        xi,
        idler: jsa.idler.clone(),
        signal: jsa.signal.clone(),
        cutoff,
        total_modes: kmax,
    })
}

/// Descending singular values; runs of equal values ordered by ascending first moment of |ζ|².
fn ordering(sv: &[f64], zeta: &DMatrix<Complex64>, axis: &Axis) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));
    let scale = sv.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    let moment = |k: usize| -> f64 {
        zeta.column(k)
            .iter()
            .enumerate()
            .map(|(j, z)| z.norm_sqr() * axis.weights[j] * axis.offsets[j])
            .sum()
    };
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && sv[order[end - 1]] - sv[order[end]] <= TIE_TOLERANCE * scale {
            end += 1;
        }
        if end - start > 1 {
            let mut group: Vec<(f64, usize)> = order[start..end].iter().map(|&k| (moment(k), k)).collect();
            group.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            for (slot, (_, k)) in group.into_iter().enumerate() {
                order[start + slot] = k;
            }
        }
        start = end;
    }
    order
}

pub fn reconstruct_jsa(decomp: &SchmidtDecomposition) -> JsaGrid {
    let (ni, ns) = (decomp.idler.len(), decomp.signal.len());
    let mut zb = decomp.zeta.clone();
    for (k, bk) in decomp.b.iter().enumerate() {
        for z in zb.column_mut(k).iter_mut() {
            *z *= *bk;
        }
    }
    let amplitude = if linalg::is_real(&zb) && linalg::is_real(&decomp.xi) {
        linalg::complexify(&(linalg::real_part(&zb) * linalg::real_part(&decomp.xi).transpose()))
    } else {
        &zb * decomp.xi.transpose()
    };
    debug_assert_eq!(amplitude.shape(), (ni, ns));
    JsaGrid {
        idler: decomp.idler.clone(),
        signal: decomp.signal.clone(),
        amplitude,
        normalized: !decomp.truncated,
    }
}
