//! Blockade shift B(R) models and the collective Rabi enhancement.

use std::path::Path;

use crate::error::{Error, Result};
use crate::params::units;

/// Map from atom separation R to blockade shift B. Immutable; share freely.
///
/// No crossover model between the van der Waals and resonant dipole-dipole
/// regimes is provided; supply a `Table` for that.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockadeModel {
    /// Separation-independent shift (rad/s). May be infinite, which the
    /// dynamics treats as a perfect blockade.
    Constant { b: f64 },
    /// B(R) = C6 / R⁶ with C6 in rad/s·m⁶.
    VanDerWaals { c6: f64 },
    /// Sampled (R, B) pairs, strictly increasing in R, B > 0 and
    /// non-increasing. Interpolation is log-log linear.
    Table { samples: Vec<(f64, f64)> },
}

impl BlockadeModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            BlockadeModel::Constant { b } => {
                if *b <= 0.0 {
                    return Err(Error::NonPositive {
                        name: "blockade shift B",
                        value: *b,
                    });
                }
            }
            BlockadeModel::VanDerWaals { c6 } => {
                if *c6 <= 0.0 || !c6.is_finite() {
                    return Err(Error::NonPositive {
                        name: "C6 coefficient",
                        value: *c6,
                    });
                }
            }
            BlockadeModel::Table { samples } => {
                if samples.len() < 2 {
                    return Err(Error::BadTable {
                        reason: "need at least two samples".into(),
                    });
                }
                for w in samples.windows(2) {
                    if w[1].0 <= w[0].0 {
                        return Err(Error::BadTable {
                            reason: format!(
                                "separations must be strictly increasing ({} then {})",
                                w[0].0, w[1].0
                            ),
                        });
                    }
                    if w[1].1 > w[0].1 {
                        return Err(Error::BadTable {
                            reason: format!(
                                "blockade shift must be non-increasing in R ({} then {})",
                                w[0].1, w[1].1
                            ),
                        });
                    }
                }
                for (r, b) in samples {
                    if *r <= 0.0 || *b <= 0.0 || !b.is_finite() {
                        return Err(Error::BadTable {
                            reason: format!("sample ({r}, {b}) must be positive and finite"),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Inline table syntax `R_um:B_mhz;R_um:B_mhz;...`.
    pub fn table_from_inline(text: &str) -> Result<Self> {
        let mut samples = Vec::new();
        for entry in text.split(';') {
            let entry = entry.trim();
            if entry.is_empty() {
                continue;
            }
            let (r, b) = entry.split_once(':').ok_or_else(|| Error::BadTable {
                reason: format!("entry `{entry}`: expected R_um:B_mhz"),
            })?;
            let r: f64 = r.trim().parse().map_err(|_| Error::BadTable {
                reason: format!("cannot parse separation `{r}`"),
            })?;
            let b: f64 = b.trim().parse().map_err(|_| Error::BadTable {
                reason: format!("cannot parse shift `{b}`"),
            })?;
            samples.push((units::um_to_m(r), units::mhz_to_rad(b)));
        }
        let model = BlockadeModel::Table { samples };
        model.validate()?;
        Ok(model)
    }

    /// Two-column CSV: separation R in μm, shift B/2π in MHz. Lines starting
    /// with `#` are comments.
    pub fn table_from_csv(text: &str) -> Result<Self> {
        let mut samples = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',');
            let (r, b) = (cols.next(), cols.next());
            let (r, b) = match (r, b) {
                (Some(r), Some(b)) => (r.trim(), b.trim()),
                _ => {
                    return Err(Error::BadTable {
                        reason: format!("line {}: expected two comma-separated columns", i + 1),
                    })
                }
            };
            let r: f64 = r.parse().map_err(|_| Error::BadTable {
                reason: format!("line {}: cannot parse separation `{r}`", i + 1),
            })?;
            let b: f64 = b.parse().map_err(|_| Error::BadTable {
                reason: format!("line {}: cannot parse shift `{b}`", i + 1),
            })?;
            samples.push((units::um_to_m(r), units::mhz_to_rad(b)));
        }
        let model = BlockadeModel::Table { samples };
        model.validate()?;
        Ok(model)
    }

    pub fn table_from_csv_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::ConfigIo {
            path: path.to_path_buf(),
            source,
        })?;
        Self::table_from_csv(&text)
    }
}

/// Blockade shift B at separation R (rad/s).
///
/// Tables interpolate log-log linearly (B spans decades over μm scales, and
/// linear interpolation badly overestimates between sparse samples of a
/// power law). No extrapolation outside the sampled range.
pub fn blockade_shift(model: &BlockadeModel, r: f64) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::NonPositive {
            name: "separation R",
            value: r,
        });
    }
    match model {
        BlockadeModel::Constant { b } => Ok(*b),
        BlockadeModel::VanDerWaals { c6 } => Ok(c6 / r.powi(6)),
        BlockadeModel::Table { samples } => {
            let lo = samples.first().expect("validated non-empty").0;
            let hi = samples.last().expect("validated non-empty").0;
            if r < lo || r > hi {
                return Err(Error::OutsideTable {
                    r_m: r,
                    lo_m: lo,
                    hi_m: hi,
                });
            }
            let k = samples.partition_point(|(rs, _)| *rs <= r);
            if k == 0 {
                return Ok(samples[0].1);
            }
            if k == samples.len() {
                return Ok(samples[samples.len() - 1].1);
            }
            let (r0, b0) = samples[k - 1];
            let (r1, b1) = samples[k];
            let t = (r.ln() - r0.ln()) / (r1.ln() - r0.ln());
            Ok((b0.ln() * (1.0 - t) + b1.ln() * t).exp())
        }
    }
}

/// Collective coupling of a fully blockaded N-atom ensemble:
/// Ω_N = √N · Ω.
pub fn collective_rabi(n_atoms: u64, omega: f64) -> Result<f64> {
    if n_atoms == 0 {
        return Err(Error::NonPositive {
            name: "atom count N",
            value: 0.0,
        });
    }
    if omega <= 0.0 {
        return Err(Error::NonPositive {
            name: "Rabi frequency",
            value: omega,
        });
    }
    Ok((n_atoms as f64).sqrt() * omega)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point_table() -> BlockadeModel {
        BlockadeModel::Table {
            samples: vec![
                (4e-6, units::mhz_to_rad(100.0)),
                (16e-6, units::mhz_to_rad(1.0)),
            ],
        }
    }

    #[test]
    fn constant_ignores_separation() {
        let m = BlockadeModel::Constant {
            b: units::mhz_to_rad(10.0),
        };
        for r in [1e-6, 5e-6, 50e-6] {
            assert_eq!(blockade_shift(&m, r).unwrap(), units::mhz_to_rad(10.0));
        }
    }

    #[test]
    fn vdw_scaling() {
        // C6 anchored so B(5 um) = 2π·2.3 GHz
        let b5 = units::ghz_to_rad(2.3);
        let c6 = b5 * (5e-6f64).powi(6);
        let m = BlockadeModel::VanDerWaals { c6 };
        let b10 = blockade_shift(&m, 10e-6).unwrap();
        assert!((b10 - b5 / 64.0).abs() / (b5 / 64.0) < 1e-12);
        assert!((units::rad_to_mhz(b10) - 35.9375).abs() < 1e-6);
        // exact halving law
        let ratio = blockade_shift(&m, 8e-6).unwrap() / blockade_shift(&m, 4e-6).unwrap();
        assert!((ratio - 2f64.powi(-6)).abs() < 1e-15);
    }

    #[test]
    fn table_log_log_midpoint() {
        let m = two_point_table();
        let b = blockade_shift(&m, 8e-6).unwrap();
        assert!((units::rad_to_mhz(b) - 10.0).abs() < 1e-9);
    }

    #[test]
    fn table_reproduces_samples_and_rejects_extrapolation() {
        let m = two_point_table();
        assert!((blockade_shift(&m, 4e-6).unwrap() - units::mhz_to_rad(100.0)).abs() < 1e-6);
        assert!((blockade_shift(&m, 16e-6).unwrap() - units::mhz_to_rad(1.0)).abs() < 1e-6);
        assert!(matches!(
            blockade_shift(&m, 3e-6),
            Err(Error::OutsideTable { .. })
        ));
        assert!(blockade_shift(&m, 17e-6).is_err());
        assert!(blockade_shift(&m, -1.0).is_err());
    }

    #[test]
    fn table_monotone_between_samples() {
        let m = BlockadeModel::Table {
            samples: vec![
                (2e-6, units::ghz_to_rad(5.0)),
                (6e-6, units::mhz_to_rad(800.0)),
                (12e-6, units::mhz_to_rad(9.0)),
            ],
        };
        m.validate().unwrap();
        let mut prev = f64::INFINITY;
        let mut r = 2e-6;
        while r <= 12e-6 {
            let b = blockade_shift(&m, r).unwrap();
            assert!(b > 0.0 && b <= prev + 1e-9);
            prev = b;
            r += 0.1e-6;
        }
    }

    #[test]
    fn table_validation_errors() {
        assert!(BlockadeModel::Table {
            samples: vec![(4e-6, 1.0)]
        }
        .validate()
        .is_err());
        assert!(BlockadeModel::Table {
            samples: vec![(4e-6, 1.0), (4e-6, 0.5)]
        }
        .validate()
        .is_err());
        assert!(BlockadeModel::Table {
            samples: vec![(4e-6, 1.0), (8e-6, 2.0)]
        }
        .validate()
        .is_err());
        assert!(BlockadeModel::Table {
            samples: vec![(4e-6, 1.0), (8e-6, -0.5)]
        }
        .validate()
        .is_err());
    }

    #[test]
    fn csv_parsing() {
        let m = BlockadeModel::table_from_csv("# R_um, B_mhz\n4, 100\n16, 1\n").unwrap();
        assert_eq!(m, two_point_table());
        assert!(BlockadeModel::table_from_csv("4\n").is_err());
        assert!(BlockadeModel::table_from_csv("4, x\n16, 1\n").is_err());
    }

    #[test]
    fn collective_enhancement() {
        let omega = units::mhz_to_rad(1.0);
        assert_eq!(collective_rabi(1, omega).unwrap(), omega);
        assert!((collective_rabi(2, omega).unwrap() - 2f64.sqrt() * omega).abs() < 1e-9);
        assert!((collective_rabi(4, omega).unwrap() - units::mhz_to_rad(2.0)).abs() < 1e-9);
        assert!(collective_rabi(0, omega).is_err());
        assert!(collective_rabi(2, -1.0).is_err());
    }
}
