//! Noise-temperature calibration: fit the affine relation between a load's
//! physical temperature and the variance the receiver reports, then invert
//! it to read unknown effective noise temperatures back out.
//!
//! The model is `sigma_hat^2 = slope * T + intercept`. The intercept is the
//! receiver's own additive floor; the slope folds together Boltzmann's
//! constant, the bandwidth, the divider, and the lumped gain. Inverting the
//! fit on a measured variance gives the effective noise temperature of
//! whatever was connected — the fit inversion is the normative definition of
//! noise temperature in this toolkit. (Different analyses of the same
//! hardware are known to attribute the open- and short-input temperatures to
//! one another; numbers here come from the inversion alone.)

use std::io::BufRead;
use std::path::Path;

use thiserror::Error;

/// Slope of the reference receive chain's temperature calibration, in SDR
/// variance units per kelvin.
pub const REFERENCE_SLOPE: f64 = 0.000_159;

/// Intercept of the reference calibration line: the chain's additive floor.
pub const REFERENCE_INTERCEPT: f64 = 0.0212;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("fit needs at least two points at distinct temperatures")]
    DegenerateFit,
    #[error("cannot invert a fit with zero slope")]
    ZeroSlope,
    #[error("receiver gain is undefined for non-positive physical msv ({0})")]
    NonPositivePhysicalMsv(f64),
    #[error("calibration csv line {line}: {reason}")]
    BadRecord { line: usize, reason: String },
    #[error("empty calibration file")]
    EmptyFile,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One calibration observation: a known physical temperature and the
/// variance the receiver reported for it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationPoint {
    pub temperature_k: f64,
    pub msv_sdr: f64,
}

/// Least-squares line through calibration points.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Per-point residuals `y_i - (slope * x_i + intercept)`, in input order.
    pub residuals: Vec<f64>,
}

impl LinearFit {
    /// Evaluate the fitted line at a temperature.
    pub fn at(&self, temperature_k: f64) -> f64 {
        self.slope * temperature_k + self.intercept
    }
}

/// The reference chain's published calibration line, usable wherever a
/// `LinearFit` is expected.
pub fn reference_fit() -> LinearFit {
    LinearFit {
        slope: REFERENCE_SLOPE,
        intercept: REFERENCE_INTERCEPT,
        residuals: Vec::new(),
    }
}

/// Ordinary least squares over (temperature, msv) points.
///
/// Fails if fewer than two points are given or all temperatures coincide.
pub fn fit_line(points: &[CalibrationPoint]) -> Result<LinearFit, CalibrationError> {
    if points.len() < 2 {
        return Err(CalibrationError::DegenerateFit);
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.temperature_k).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.msv_sdr).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for p in points {
        let dx = p.temperature_k - mean_x;
        sxx += dx * dx;
        sxy += dx * (p.msv_sdr - mean_y);
    }
    if sxx <= 0.0 || !sxx.is_finite() {
        return Err(CalibrationError::DegenerateFit);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let residuals = points
        .iter()
        .map(|p| p.msv_sdr - (slope * p.temperature_k + intercept))
        .collect();
    Ok(LinearFit {
        slope,
        intercept,
        residuals,
    })
}

/// Invert a calibration line on a measured variance:
/// `T = (msv - intercept) / slope`.
pub fn extract_noise_temp(msv_sdr: f64, fit: &LinearFit) -> Result<f64, CalibrationError> {
    if fit.slope == 0.0 {
        return Err(CalibrationError::ZeroSlope);
    }
    Ok((msv_sdr - fit.intercept) / fit.slope)
}

/// Back out the lumped receiver gain from one known load:
/// `G_rx = (msv_sdr - offset) / physical_msv`.
pub fn receiver_gain(
    msv_sdr: f64,
    offset: f64,
    physical_msv: f64,
) -> Result<f64, CalibrationError> {
    if physical_msv <= 0.0 {
        return Err(CalibrationError::NonPositivePhysicalMsv(physical_msv));
    }
    Ok((msv_sdr - offset) / physical_msv)
}

/// Read calibration points from a CSV file with columns `temp_k,msv_sdr`.
/// A non-numeric first line is treated as a header; `#` lines are comments.
pub fn read_points_csv<P: AsRef<Path>>(path: P) -> Result<Vec<CalibrationPoint>, CalibrationError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut points = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let parsed = if fields.len() == 2 {
            fields[0]
                .parse::<f64>()
                .and_then(|t| fields[1].parse::<f64>().map(|m| (t, m)))
                .ok()
        } else {
            None
        };
        match parsed {
            Some((temperature_k, msv_sdr)) => points.push(CalibrationPoint {
                temperature_k,
                msv_sdr,
            }),
            None if points.is_empty() && idx == 0 => continue, // header
            None => {
                return Err(CalibrationError::BadRecord {
                    line: idx + 1,
                    reason: format!("expected `temp_k,msv_sdr`, got `{trimmed}`"),
                })
            }
        }
    }
    if points.is_empty() {
        return Err(CalibrationError::EmptyFile);
    }
    Ok(points)
}

// ----------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::receiver_model::ReceiverChain;

    fn rel_err(have: f64, want: f64) -> f64 {
        ((have - want) / want).abs()
    }

    fn pt(t: f64, m: f64) -> CalibrationPoint {
        CalibrationPoint {
            temperature_k: t,
            msv_sdr: m,
        }
    }

    #[test]
    fn exact_line_is_recovered_exactly() {
        let points = vec![pt(0.0, 1.0), pt(1.0, 3.0), pt(2.0, 5.0)];
        let fit = fit_line(&points).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn three_point_temperature_calibration_matches_the_reference_line() {
        // Room temperature, ice water, liquid nitrogen.
        let points = vec![
            pt(296.0, 0.0676),
            pt(273.0, REFERENCE_SLOPE * 273.0 + REFERENCE_INTERCEPT),
            pt(77.0, 0.0333),
        ];
        let fit = fit_line(&points).unwrap();
        assert!(
            rel_err(fit.slope, REFERENCE_SLOPE) < 0.02,
            "slope {} vs {REFERENCE_SLOPE}",
            fit.slope
        );
        assert!(
            rel_err(fit.intercept, REFERENCE_INTERCEPT) < 0.02,
            "intercept {} vs {REFERENCE_INTERCEPT}",
            fit.intercept
        );
    }

    #[test]
    fn degenerate_fits_are_rejected() {
        assert!(matches!(
            fit_line(&[pt(296.0, 0.07)]),
            Err(CalibrationError::DegenerateFit)
        ));
        assert!(matches!(
            fit_line(&[pt(296.0, 0.07), pt(296.0, 0.08)]),
            Err(CalibrationError::DegenerateFit)
        ));
    }

    #[test]
    fn noise_temperature_inversion_examples() {
        let fit = reference_fit();
        // The chain floor itself reads as zero kelvin.
        assert!(extract_noise_temp(REFERENCE_INTERCEPT, &fit).unwrap().abs() < 1e-12);
        // Open-input floor.
        let t_open = extract_noise_temp(0.0274, &fit).unwrap();
        assert!((t_open - 39.0).abs() < 0.1, "open: {t_open} K");
        // Short-input floor.
        let t_short = extract_noise_temp(0.0283, &fit).unwrap();
        assert!((t_short - 44.7).abs() < 0.1, "short: {t_short} K");
    }

    #[test]
    fn zero_slope_cannot_be_inverted() {
        let fit = LinearFit {
            slope: 0.0,
            intercept: 0.0212,
            residuals: vec![],
        };
        assert!(matches!(
            extract_noise_temp(0.05, &fit),
            Err(CalibrationError::ZeroSlope)
        ));
    }

    #[test]
    fn receiver_gain_from_the_room_temperature_load() {
        // 50 * kTB at 296 K and 1 MHz.
        let physical = 2.043_360_52e-13;
        let g = receiver_gain(0.0676, 0.0212, physical).unwrap();
        assert!(rel_err(g, 2.3e11) < 0.02, "gain {g:e}");
        assert!(matches!(
            receiver_gain(0.0676, 0.0212, 0.0),
            Err(CalibrationError::NonPositivePhysicalMsv(_))
        ));
    }

    #[test]
    fn receiver_gain_round_trips_with_the_unit_mapping() {
        let chain = ReceiverChain::default();
        let physical = 2.043_360_52e-13;
        let msv = chain.sdr_variance(physical).unwrap();
        let g = receiver_gain(msv, chain.offset, physical).unwrap();
        assert!(rel_err(g, chain.gain_rx) < 1e-12);
    }

    #[test]
    fn noiseless_forward_synthesis_recovers_the_generating_line() {
        let truth = reference_fit();
        let points: Vec<CalibrationPoint> = [296.0, 273.0, 77.0]
            .iter()
            .map(|&t| pt(t, truth.at(t)))
            .collect();
        let fit = fit_line(&points).unwrap();
        assert!((fit.slope - truth.slope).abs() < 1e-15);
        assert!((fit.intercept - truth.intercept).abs() < 1e-12);
    }

    #[test]
    fn csv_points_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("points.csv");
        std::fs::write(&path, "temp_k,msv_sdr\n296,0.0676\n77, 0.0333\n").unwrap();
        let points = read_points_csv(&path).unwrap();
        assert_eq!(points.len(), 2);
        assert_eq!(points[1], pt(77.0, 0.0333));
    }

    #[test]
    fn csv_bad_record_is_reported_with_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("points.csv");
        std::fs::write(&path, "temp_k,msv_sdr\n296,0.0676\nnot-a-number\n").unwrap();
        match read_points_csv(&path) {
            Err(CalibrationError::BadRecord { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected BadRecord, got {other:?}"),
        }
    }
}
