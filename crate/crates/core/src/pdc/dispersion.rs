//! Bundled group-slowness table for periodically poled KTP.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

const KTP_TABLE: &str = include_str!("../../data/ktp_group_slowness.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrystalAxis {
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlownessRow {
    pub wavelength_nm: f64,
    pub k_y: f64,
    pub k_z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersionTable {
    pub version: u32,
    pub rows: Vec<SlownessRow>,
}

impl DispersionTable {
    pub fn ktp() -> Self {
        Self::parse(KTP_TABLE).expect("bundled KTP table is well formed")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut version = 0;
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("version:") {
                    version = v
                        .trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("dispersion table line {}: bad version", lineno + 1)))?;
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let cols: Vec<f64> = line
                .split_whitespace()
                .map(|c| c.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("dispersion table line {}: {e}", lineno + 1)))?;
            if cols.len() != 3 {
                return Err(Error::Config(format!(
                    "dispersion table line {}: expected 3 columns, found {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            rows.push(SlownessRow {
                wavelength_nm: cols[0],
                k_y: cols[1],
                k_z: cols[2],
            });
        }
        Ok(DispersionTable { version, rows })
    }

    /// Group slowness at a tabulated wavelength; no interpolation.
    pub fn slowness(&self, wavelength_nm: f64, axis: CrystalAxis) -> Result<f64> {
        let row = self
            .rows
            .iter()
            .find(|r| (r.wavelength_nm - wavelength_nm).abs() < 1e-6)
            .ok_or(Error::MissingDispersion(wavelength_nm))?;
        Ok(match axis {
            CrystalAxis::Y => row.k_y,
            CrystalAxis::Z => row.k_z,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_table_loads() {
        let t = DispersionTable::ktp();
        assert_eq!(t.version, 1);
        assert!(t.rows.len() >= 6);
        let ky = t.slowness(800.0, CrystalAxis::Y).unwrap();
        let kz = t.slowness(800.0, CrystalAxis::Z).unwrap();
        assert!(kz > ky && ky > 5e-9 && kz < 7e-9);
    }

    #[test]
    fn missing_wavelength() {
        assert!(matches!(
            DispersionTable::ktp().slowness(801.0, CrystalAxis::Y),
            Err(Error::MissingDispersion(_))
        ));
    }

    #[test]
    fn malformed_rows() {
        assert!(DispersionTable::parse("400 1.0").is_err());
        assert!(DispersionTable::parse("400 1.0 x").is_err());
    }
}
