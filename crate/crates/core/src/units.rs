//! Unit conversions and uniform frequency grids.
//!
//! All frequencies are angular frequencies in s⁻¹.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const SPEED_OF_LIGHT: f64 = 2.99792458e8;

fn fwhm_per_sigma() -> f64 {
    2.0 * (2.0 * std::f64::consts::LN_2).sqrt()
}

/// Gaussian amplitude width σ (s⁻¹) for a FWHM quoted in wavelength.
pub fn fwhm_nm_to_sigma(center_nm: f64, fwhm_nm: f64) -> Result<f64> {
    if !(center_nm > 0.0) || !(fwhm_nm > 0.0) {
        return Err(Error::InvalidInput(format!(
            "wavelength and FWHM must be positive (got {center_nm} nm, {fwhm_nm} nm)"
        )));
    }
    let lambda = center_nm * 1e-9;
    let dw = 2.0 * PI * SPEED_OF_LIGHT * fwhm_nm * 1e-9 / (lambda * lambda);
    Ok(dw / fwhm_per_sigma())
}

pub fn sigma_to_fwhm_nm(sigma: f64, center_nm: f64) -> Result<f64> {
    if !(center_nm > 0.0) || !(sigma > 0.0) {
        return Err(Error::InvalidInput(format!(
            "sigma and wavelength must be positive (got {sigma}, {center_nm} nm)"
        )));
    }
    let lambda = center_nm * 1e-9;
    Ok(sigma * fwhm_per_sigma() * lambda * lambda / (2.0 * PI * SPEED_OF_LIGHT) * 1e9)
}

pub fn wavelength_nm_to_angular(lambda_nm: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / (lambda_nm * 1e-9)
}

pub fn angular_to_wavelength_nm(omega: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / omega * 1e9
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_points: usize,
    pub span: f64,
    pub center: f64,
}

impl GridSpec {
    pub fn new(n_points: usize, span: f64, center: f64) -> Result<Self> {
        let spec = GridSpec { n_points, span, center };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points < 2 {
            return Err(Error::InvalidInput(format!(
                "grid needs at least 2 points (got {})",
                self.n_points
            )));
        }
        if !(self.span > 0.0) || !self.span.is_finite() {
            return Err(Error::InvalidInput(format!(
                "grid span must be positive (got {})",
                self.span
            )));
        }
        if !self.center.is_finite() {
            return Err(Error::InvalidInput("grid center must be finite".into()));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        self.span / (self.n_points - 1) as f64
    }
}

/// Sampled frequency axis with per-sample quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub center: f64,
    pub step: f64,
    pub offsets: Vec<f64>,
    pub samples: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Axis {
    pub fn from_spec(spec: &GridSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n_points;
        let denom = 2.0 * (n - 1) as f64;
        let offsets: Vec<f64> = (0..n)
            .map(|j| (2.0 * j as f64 - (n - 1) as f64) * spec.span / denom)
            .collect();
        let samples = offsets.iter().map(|o| spec.center + o).collect();
        let step = spec.step();
        Ok(Axis {
            center: spec.center,
            step,
            offsets,
            samples,
            weights: vec![step; n],
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Index of the sample closest to `omega`; ties go to the lower index.
    pub fn nearest_index(&self, omega: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, s) in self.samples.iter().enumerate() {
            let d = (s - omega).abs();
            if d < best_d {
                best = j;
                best_d = d;
            }
        }
        best
    }

    pub fn same_as(&self, other: &Axis) -> bool {
        self.samples == other.samples && self.weights == other.weights
    }
}

/// Idler and signal axes, both centered on `spec.center`.
pub fn build_axis(spec: &GridSpec) -> Result<(Axis, Axis)> {
    let a = Axis::from_spec(spec)?;
    Ok((a.clone(), a))
}
