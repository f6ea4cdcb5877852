//! Closed-form heralding metrics for one- and two-photon heralds.

use crate::error::{Error, Result};
use crate::filtering::{
    diagonalize_signal, overlap_matrices, weighted_by_b, DiagonalModeSpectrum, FilterSpec, OverlapMatrices,
};
use crate::linalg::{trace_of_product, trace_re};
use crate::schmidt::SchmidtDecomposition;
use serde::Serialize;

/// Metrics of the heralded signal state; absent when the herald never fires.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Conditional {
    pub g2: f64,
    pub purity: f64,
    pub fidelity: f64,
    pub d_spectrum: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeraldReport {
    pub n: u8,
    pub probability: f64,
    pub conditional: Option<Conditional>,
}

impl HeraldReport {
    fn no_click(n: u8) -> Self {
        HeraldReport {
            n,
            probability: 0.0,
            conditional: None,
        }
    }

    pub fn is_no_click(&self) -> bool {
        self.conditional.is_none()
    }

    pub fn g2(&self) -> Option<f64> {
        self.conditional.as_ref().map(|c| c.g2)
    }

    pub fn purity(&self) -> Option<f64> {
        self.conditional.as_ref().map(|c| c.purity)
    }

    pub fn fidelity(&self) -> Option<f64> {
        self.conditional.as_ref().map(|c| c.fidelity)
    }
}

fn pow_sum(b: &[f64], p: i32) -> f64 {
    b.iter().map(|x| x.powi(p)).sum()
}

/// `Σ_{k<k'} b_k² b_k'² + Σ_k b_k⁴`.
pub fn pair_weight(b: &[f64]) -> f64 {
    let s2 = pow_sum(b, 2);
    (s2 * s2 + pow_sum(b, 4)) / 2.0
}

/// `Σ_{k<k'} b_k⁴ b_k'⁴ + Σ_k b_k⁸`.
fn pair_weight_sq(b: &[f64]) -> f64 {
    let s4 = pow_sum(b, 4);
    (s4 * s4 + pow_sum(b, 8)) / 2.0
}

pub fn norm_constant(chi: f64, b: &[f64]) -> f64 {
    let c2 = chi * chi;
    let v = (1.0 + c2).powi(2) + c2 + c2 * c2 * pair_weight(b);
    1.0 / v.sqrt()
}

pub fn herald_single_perfect(chi: f64, b: &[f64]) -> HeraldReport {
    let n = norm_constant(chi, b);
    let d: Vec<f64> = b.iter().map(|x| x * x).collect();
    HeraldReport {
        n: 1,
        probability: n * n * chi * chi,
        conditional: Some(Conditional {
            g2: 0.0,
            purity: pow_sum(b, 4),
            fidelity: d.first().copied().unwrap_or(0.0),
            d_spectrum: d,
        }),
    }
}

pub fn herald_single_inefficient(chi: f64, eta: f64, b: &[f64]) -> HeraldReport {
    if eta <= 0.0 {
        return HeraldReport::no_click(1);
    }
    let n = norm_constant(chi, b);
    let c2 = chi * chi;
    let s = pair_weight(b);
    let loss = 1.0 - eta;
    let probability = n * n * c2 * eta * (1.0 + 2.0 * c2 * loss * s);
    let n1 = 1.0 / (1.0 + 2.0 * c2 * loss * s);
    let gamma_i = 4.0 * c2 * loss * s;
    let g2 = gamma_i / (n1 * (1.0 + gamma_i).powi(2));
    let purity = n1 * n1 * (pow_sum(b, 4) + 4.0 * c2 * c2 * loss * loss * pair_weight_sq(b));
    let d: Vec<f64> = b.iter().map(|x| n1 * x * x).collect();
    HeraldReport {
        n: 1,
        probability,
        conditional: Some(Conditional {
            g2,
            purity,
            fidelity: d.first().copied().unwrap_or(0.0),
            d_spectrum: d,
        }),
    }
}

/// Trace invariants of `M = diag(b)·Tmat·diag(b)` and `Q = diag(b)·Rmat·diag(b)`;
/// everything the filtered metrics need apart from χ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilteredTraces {
    pub pair_weight: f64,
    pub tr_m: f64,
    pub tr_q: f64,
    pub tr_mq: f64,
    pub tr_m2: f64,
    pub tr_q2: f64,
    pub tr_m2q2: f64,
    pub tr_m4: f64,
    pub lambda: Vec<f64>,
}

impl FilteredTraces {
    pub fn new(b: &[f64], overlaps: &OverlapMatrices, diag: &DiagonalModeSpectrum) -> Self {
        let m = weighted_by_b(b, &overlaps.tmat);
        let q = weighted_by_b(b, &overlaps.rmat);
        let m2 = &m * &m;
        let q2 = &q * &q;
        FilteredTraces {
            pair_weight: pair_weight(b),
            tr_m: trace_re(&m),
            tr_q: trace_re(&q),
            tr_mq: trace_of_product(&m, &q),
            tr_m2: trace_re(&m2),
            tr_q2: trace_re(&q2),
            tr_m2q2: trace_of_product(&m2, &q2),
            tr_m4: trace_of_product(&m2, &m2),
            lambda: diag.lambda.clone(),
        }
    }

    fn lambda_max(&self) -> f64 {
        self.lambda.first().copied().unwrap_or(0.0)
    }
}

fn norm_from_weight(chi: f64, s: f64) -> f64 {
    let c2 = chi * chi;
    1.0 / ((1.0 + c2).powi(2) + c2 + c2 * c2 * s).sqrt()
}

pub fn single_filtered_from_traces(chi: f64, t: &FilteredTraces) -> HeraldReport {
    let c2 = chi * chi;
    let a = t.tr_m;
    let bb = t.tr_m * t.tr_q + t.tr_mq;
    let denom = a + c2 * bb;
    if !(denom > 0.0) {
        return HeraldReport::no_click(1);
    }
    let n = norm_from_weight(chi, t.pair_weight);
    let omega2 = t.tr_m2 * t.tr_q2 + 2.0 * t.tr_m2q2 + t.tr_mq * t.tr_mq;
    let g2 = 2.0 * c2 * bb * denom / (a + 2.0 * c2 * bb).powi(2);
    let purity = (t.tr_m2 + c2 * c2 * omega2) / (denom * denom);
    let d: Vec<f64> = t.lambda.iter().map(|l| l / denom).collect();
    HeraldReport {
        n: 1,
        probability: n * n * c2 * denom,
        conditional: Some(Conditional {
            g2,
            purity,
            fidelity: t.lambda_max() / denom,
            d_spectrum: d,
        }),
    }
}

pub fn herald_single_filtered(
    chi: f64,
    b: &[f64],
    overlaps: &OverlapMatrices,
    diag: &DiagonalModeSpectrum,
) -> HeraldReport {
    single_filtered_from_traces(chi, &FilteredTraces::new(b, overlaps, diag))
}

pub fn herald_double_perfect(chi: f64, b: &[f64]) -> HeraldReport {
    let n = norm_constant(chi, b);
    let s = pair_weight(b);
    if !(s > 0.0) {
        return HeraldReport::no_click(2);
    }
    let b0 = b.first().copied().unwrap_or(0.0);
    HeraldReport {
        n: 2,
        probability: n * n * chi.powi(4) * s,
        conditional: Some(Conditional {
            g2: 0.5,
            purity: pair_weight_sq(b) / (s * s),
            fidelity: b0.powi(4) / s,
            d_spectrum: b.iter().map(|x| x * x / s.sqrt()).collect(),
        }),
    }
}

pub fn herald_double_inefficient(chi: f64, eta: f64, b: &[f64]) -> HeraldReport {
    if eta <= 0.0 {
        return HeraldReport::no_click(2);
    }
    let mut r = herald_double_perfect(chi, b);
    r.probability *= eta * eta;
    r
}

pub fn double_filtered_from_traces(chi: f64, t: &FilteredTraces) -> HeraldReport {
    let denom = t.tr_m * t.tr_m + t.tr_m2;
    if !(denom > 0.0) {
        return HeraldReport::no_click(2);
    }
    let n = norm_from_weight(chi, t.pair_weight);
    let lm = t.lambda_max();
    let scale = (2.0 / denom).sqrt();
    HeraldReport {
        n: 2,
        probability: n * n * chi.powi(4) * denom / 2.0,
        conditional: Some(Conditional {
            g2: 0.5,
            purity: 2.0 * (t.tr_m2 * t.tr_m2 + t.tr_m4) / (denom * denom),
            fidelity: 2.0 * lm * lm / denom,
            d_spectrum: t.lambda.iter().map(|l| l * scale).collect(),
        }),
    }
}

pub fn herald_double_filtered(
    chi: f64,
    b: &[f64],
    overlaps: &OverlapMatrices,
    diag: &DiagonalModeSpectrum,
) -> HeraldReport {
    double_filtered_from_traces(chi, &FilteredTraces::new(b, overlaps, diag))
}

/// Detection model with every χ-independent quantity precomputed.
#[derive(Debug, Clone)]
pub enum HeraldModel {
    Perfect { b: Vec<f64> },
    Inefficient { b: Vec<f64>, eta: f64 },
    Filtered { traces: FilteredTraces },
}

impl HeraldModel {
    /// Perfect or inefficient closed forms for an unfiltered detector, trace forms otherwise.
    pub fn new(decomp: &SchmidtDecomposition, filter: &FilterSpec) -> Result<Self> {
        filter.validate()?;
        if filter.is_unfiltered() {
            let b = decomp.b.clone();
            return Ok(if filter.eta == 1.0 {
                HeraldModel::Perfect { b }
            } else {
                HeraldModel::Inefficient { b, eta: filter.eta }
            });
        }
        let overlaps = overlap_matrices(decomp, filter)?;
        Ok(Self::from_overlaps(&decomp.b, &overlaps))
    }

    pub fn from_overlaps(b: &[f64], overlaps: &OverlapMatrices) -> Self {
        let diag = diagonalize_signal(b, &overlaps.tmat);
        HeraldModel::Filtered {
            traces: FilteredTraces::new(b, overlaps, &diag),
        }
    }

    pub fn report(&self, chi: f64, n: u8) -> Result<HeraldReport> {
        Ok(match (self, n) {
            (HeraldModel::Perfect { b }, 1) => herald_single_perfect(chi, b),
            (HeraldModel::Perfect { b }, 2) => herald_double_perfect(chi, b),
            (HeraldModel::Inefficient { b, eta }, 1) => herald_single_inefficient(chi, *eta, b),
            (HeraldModel::Inefficient { b, eta }, 2) => herald_double_inefficient(chi, *eta, b),
            (HeraldModel::Filtered { traces }, 1) => single_filtered_from_traces(chi, traces),
            (HeraldModel::Filtered { traces }, 2) => double_filtered_from_traces(chi, traces),
            _ => {
                return Err(Error::InvalidInput(format!(
                    "herald photon number must be 1 or 2 (got {n})"
                )))
            }
        })
    }
}

/// Filtered purities written as explicit sums over Schmidt-mode indices.
pub mod indexed {
    use crate::filtering::OverlapMatrices;
    use num_complex::Complex64;

    fn tm(o: &OverlapMatrices, k: usize, l: usize) -> Complex64 {
        o.tmat[(k, l)]
    }

    fn rm(o: &OverlapMatrices, k: usize, l: usize) -> Complex64 {
        o.rmat[(k, l)]
    }

    /// One-photon herald purity as a sum over four Schmidt indices.
    pub fn purity_single_filtered(chi: f64, b: &[f64], o: &OverlapMatrices) -> f64 {
        let k_len = b.len();
        let b2: Vec<f64> = b.iter().map(|x| x * x).collect();
        let b4: Vec<f64> = b2.iter().map(|x| x * x).collect();
        let mut first = 0.0;
        for k in 0..k_len {
            for kt in 0..k_len {
                first += b2[k] * b2[kt] * tm(o, k, kt).norm_sqr();
            }
        }
        let mut second = 0.0;
        for kt in 0..k_len {
            let mut inner = 0.0;
            for k in 0..k_len {
                for kp in (k + 1)..k_len {
                    let z = rm(o, k, kt) * tm(o, kp, kt) + rm(o, kp, kt) * tm(o, k, kt);
                    inner += b2[k] * b2[kp] * z.norm_sqr();
                }
                inner += 2.0 * b4[k] * (rm(o, k, kt) * tm(o, k, kt)).norm_sqr();
            }
            second += 2.0 * b4[kt] * inner;
        }
        for kt in 0..k_len {
            for ktp in (kt + 1)..k_len {
                let mut inner = 0.0;
                for k in 0..k_len {
                    let z = rm(o, k, kt) * tm(o, k, ktp) + rm(o, k, ktp) * tm(o, k, kt);
                    inner += 2.0 * b4[k] * z.norm_sqr();
                    for kp in (k + 1)..k_len {
                        let z = rm(o, k, kt) * tm(o, kp, ktp)
                            + rm(o, kp, kt) * tm(o, k, ktp)
                            + rm(o, k, ktp) * tm(o, kp, kt)
                            + rm(o, kp, ktp) * tm(o, k, kt);
                        inner += b2[k] * b2[kp] * z.norm_sqr();
                    }
                }
                second += b2[kt] * b2[ktp] * inner;
            }
        }
        let c2 = chi * chi;
        let (a, bb) = herald_ab(b, o);
        (first + c2 * c2 * second) / (a + c2 * bb).powi(2)
    }

    fn herald_ab(b: &[f64], o: &OverlapMatrices) -> (f64, f64) {
        let k_len = b.len();
        let b2: Vec<f64> = b.iter().map(|x| x * x).collect();
        let a: f64 = (0..k_len).map(|k| b2[k] * o.tmat[(k, k)].re).sum();
        let q: f64 = (0..k_len).map(|k| b2[k] * o.rmat[(k, k)].re).sum();
        let mut cross = 0.0;
        for k in 0..k_len {
            for l in 0..k_len {
                cross += b2[k] * b2[l] * (o.tmat[(k, l)] * o.rmat[(l, k)]).re;
            }
        }
        (a, a * q + cross)
    }

    /// Two-photon herald purity as a sum over four Schmidt indices.
    pub fn purity_double_filtered(b: &[f64], o: &OverlapMatrices) -> f64 {
        let k_len = b.len();
        let b2: Vec<f64> = b.iter().map(|x| x * x).collect();
        let b4: Vec<f64> = b2.iter().map(|x| x * x).collect();
        let mut total = 0.0;
        for k in 0..k_len {
            for kp in (k + 1)..k_len {
                let mut inner = 0.0;
                for kt in 0..k_len {
                    inner += 2.0 * b4[kt] * (tm(o, k, kt) * tm(o, kp, kt)).norm_sqr();
                    for ktp in (kt + 1)..k_len {
                        let z = tm(o, k, kt) * tm(o, kp, ktp) + tm(o, kp, kt) * tm(o, k, ktp);
                        inner += b2[kt] * b2[ktp] * z.norm_sqr();
                    }
                }
                total += b2[k] * b2[kp] * inner;
            }
            let mut inner = 0.0;
            for kt in 0..k_len {
                inner += b4[kt] * tm(o, k, kt).norm_sqr().powi(2);
                for ktp in (kt + 1)..k_len {
                    inner += 2.0 * b2[kt] * b2[ktp] * (tm(o, k, kt) * tm(o, k, ktp)).norm_sqr();
                }
            }
            total += b4[k] * inner;
        }
        let tr_m: f64 = (0..k_len).map(|k| b2[k] * o.tmat[(k, k)].re).sum();
        let mut tr_m2 = 0.0;
        for k in 0..k_len {
            for l in 0..k_len {
                tr_m2 += b2[k] * b2[l] * o.tmat[(k, l)].norm_sqr();
            }
        }
        let n2 = 2.0 / (tr_m * tr_m + tr_m2);
        n2 * n2 * total
    }
}
