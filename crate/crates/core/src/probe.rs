//! Probe tables and the two-stage calibration policy used for every
//! inequality that only holds up to an unknown constant.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One row of a probe table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub probe: String,
    pub r: f64,
    pub p: f64,
    pub q: f64,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

pub const PROBE_CSV_HEADER: &str = "probe,r,p,q,measured,bound,pass";

pub fn write_probe_csv(writer: &mut impl Write, rows: &[ProbeRow]) -> Result<()> {
    writeln!(writer, "{PROBE_CSV_HEADER}")?;
    for row in rows {
        writeln!(
            writer,
            "{},{},{},{},{:e},{:e},{}",
            row.probe, row.r, row.p, row.q, row.measured, row.bound, row.pass
        )?;
    }
    Ok(())
}

/// Outcome of measuring a constant on a calibration set and checking a
/// validation set against `factor` times that constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedCheck {
    pub constant: f64,
    pub factor: f64,
    pub worst: f64,
    pub pass: bool,
}

pub const DEFAULT_SLACK: f64 = 2.0;

pub fn calibrated_check(calibration: &[f64], validation: &[f64], factor: f64) -> CalibratedCheck {
    let constant = calibration.iter().copied().fold(0.0, f64::max);
    let worst = validation
        .iter()
        .map(|&v| if v.is_finite() { v } else { f64::INFINITY })
        .fold(0.0, f64::max);
    CalibratedCheck {
        constant,
        factor,
        worst,
        pass: worst.is_finite() && worst <= factor * constant,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_only_csv_for_empty_table() {
        let mut buf = Vec::new();
        write_probe_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{PROBE_CSV_HEADER}\n"));
    }

    #[test]
    fn calibration_policy() {
        let c = calibrated_check(&[1.0, 3.0], &[5.9, 2.0], 2.0);
        assert_eq!(c.constant, 3.0);
        assert!(c.pass);
        assert!(!calibrated_check(&[1.0], &[2.5], 2.0).pass);
        assert!(!calibrated_check(&[1.0], &[f64::NAN, 0.5], 2.0).pass);
    }
}
