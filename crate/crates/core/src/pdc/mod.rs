//! Pump envelope, phase matching and the joint spectral amplitude.

pub mod dispersion;

use crate::error::{Error, Result};
use crate::units::{Axis, GridSpec};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const DEFAULT_GAMMA: f64 = 0.193;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpSpec {
    pub mu_p: f64,
    pub sigma_p: f64,
}

impl PumpSpec {
    pub fn new(mu_p: f64, sigma_p: f64) -> Result<Self> {
        if !(sigma_p > 0.0) || !(mu_p > 0.0) {
            return Err(Error::InvalidInput(format!(
                "pump center and width must be positive (got {mu_p}, {sigma_p})"
            )));
        }
        Ok(PumpSpec { mu_p, sigma_p })
    }

    /// Degenerate signal/idler center frequency.
    pub fn mu(&self) -> f64 {
        self.mu_p / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrystalSpec {
    pub length: f64,
    pub kp: f64,
    pub ks: f64,
    pub ki: f64,
    pub delta0: f64,
    pub gamma: f64,
}

impl CrystalSpec {
    pub fn new(length: f64, kp: f64, ks: f64, ki: f64) -> Result<Self> {
        let c = CrystalSpec {
            length,
            kp,
            ks,
            ki,
            delta0: 0.0,
            gamma: DEFAULT_GAMMA,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) {
            return Err(Error::InvalidInput(format!(
                "crystal length must be positive (got {})",
                self.length
            )));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidInput(format!(
                "gamma must be positive (got {})",
                self.gamma
            )));
        }
        Ok(())
    }

    /// Copy with signal and idler roles exchanged.
    pub fn swapped(&self) -> Self {
        CrystalSpec {
            ks: self.ki,
            ki: self.ks,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PmfKind {
    Sinc,
    Gaussian,
}

pub fn pump_envelope(nu_sum: f64, pump: &PumpSpec) -> f64 {
    (-nu_sum * nu_sum / (2.0 * pump.sigma_p * pump.sigma_p)).exp()
}

pub fn phase_mismatch(nu_i: f64, nu_s: f64, crystal: &CrystalSpec) -> f64 {
    (crystal.ks - crystal.kp) * nu_s + (crystal.ki - crystal.kp) * nu_i + crystal.delta0
}

pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

pub fn phase_matching(delta_k: f64, crystal: &CrystalSpec, kind: PmfKind) -> f64 {
    match kind {
        PmfKind::Sinc => sinc(crystal.length * delta_k / 2.0),
        PmfKind::Gaussian => {
            let l = crystal.length;
            (-crystal.gamma * l * l * delta_k * delta_k / 4.0).exp()
        }
    }
}

/// Complex joint spectral amplitude `f[i, s]` sampled on idler (rows) and signal (columns) axes.
#[derive(Debug, Clone, PartialEq)]
pub struct JsaGrid {
    pub idler: Axis,
    pub signal: Axis,
    pub amplitude: DMatrix<Complex64>,
    pub normalized: bool,
}

impl JsaGrid {
    pub fn new(idler: Axis, signal: Axis, amplitude: DMatrix<Complex64>) -> Result<Self> {
        if amplitude.nrows() != idler.len() || amplitude.ncols() != signal.len() {
            return Err(Error::AxisMismatch(format!(
                "amplitude is {}x{} but axes have {} and {} samples",
                amplitude.nrows(),
                amplitude.ncols(),
                idler.len(),
                signal.len()
            )));
        }
        Ok(JsaGrid {
            idler,
            signal,
            amplitude,
            normalized: false,
        })
    }

    /// Σ |f|² w_i w_s, summed in sorted order so the result does not depend on layout.
    pub fn norm_sqr(&self) -> f64 {
        let mut terms: Vec<f64> = Vec::with_capacity(self.amplitude.len());
        for s in 0..self.signal.len() {
            for i in 0..self.idler.len() {
                let w = self.idler.weights[i] * self.signal.weights[s];
                terms.push(self.amplitude[(i, s)].norm_sqr() * w);
            }
        }
        terms.sort_by(f64::total_cmp);
        terms.iter().sum()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n2 = self.norm_sqr();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(Error::ZeroJsa);
        }
        let scale = 1.0 / n2.sqrt();
        self.amplitude.apply(|z| *z *= scale);
        self.normalized = true;
        Ok(())
    }

    pub fn is_real(&self) -> bool {
        self.amplitude.iter().all(|z| z.im == 0.0)
    }

    pub fn transpose(&self) -> JsaGrid {
        JsaGrid {
            idler: self.signal.clone(),
            signal: self.idler.clone(),
            amplitude: self.amplitude.transpose(),
            normalized: self.normalized,
        }
    }
}

/// Normalized JSA `α(ν_i+ν_s)·Φ(Δk)` on the grid.
pub fn build_jsa(pump: &PumpSpec, crystal: &CrystalSpec, grid: &GridSpec, kind: PmfKind) -> Result<JsaGrid> {
    let idler = Axis::from_spec(grid)?;
    let signal = idler.clone();
    build_jsa_on(pump, crystal, idler, signal, kind)
}

pub fn build_jsa_on(
    pump: &PumpSpec,
    crystal: &CrystalSpec,
    idler: Axis,
    signal: Axis,
    kind: PmfKind,
) -> Result<JsaGrid> {
    crystal.validate()?;
    let mu = pump.mu();
    let shift_i = idler.center - mu;
    let shift_s = signal.center - mu;
    let nu_i: Vec<f64> = idler.offsets.iter().map(|o| shift_i + o).collect();
    let nu_s: Vec<f64> = signal.offsets.iter().map(|o| shift_s + o).collect();
    let amplitude = DMatrix::from_fn(nu_i.len(), nu_s.len(), |i, s| {
        let a = pump_envelope(nu_i[i] + nu_s[s], pump);
        let phi = phase_matching(phase_mismatch(nu_i[i], nu_s[s], crystal), crystal, kind);
        Complex64::new(a * phi, 0.0)
    });
    let mut jsa = JsaGrid::new(idler, signal, amplitude)?;
    jsa.normalize()?;
    Ok(jsa)
}

/// Pump slowness for the symmetric group-velocity condition.
pub fn symmetric_pump_slowness(ks: f64, ki: f64) -> f64 {
    (ks + ki) / 2.0
}

/// Crystal length that makes the Gaussian-approximated JSA separable when
/// `kp = (ks + ki)/2`.
pub fn symmetric_length(sigma_p: f64, ks: f64, ki: f64, gamma: f64) -> Result<f64> {
    if ks == ki {
        return Err(Error::DegenerateSlowness);
    }
    if !(sigma_p > 0.0) || !(gamma > 0.0) {
        return Err(Error::InvalidInput("sigma_p and gamma must be positive".into()));
    }
    let d = ks - ki;
    Ok((8.0 / (gamma * sigma_p * sigma_p * d * d)).sqrt())
}

/// `2/σ² + γL²(ks−kp)(ki−kp)`; zero means the Gaussian-PMF JSA factorizes.
pub fn separability_residual(pump: &PumpSpec, crystal: &CrystalSpec) -> f64 {
    let l = crystal.length;
    2.0 / (pump.sigma_p * pump.sigma_p) + crystal.gamma * l * l * (crystal.ks - crystal.kp) * (crystal.ki - crystal.kp)
}
