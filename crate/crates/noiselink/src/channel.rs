//! Free-space link model for the variance contrast: an isotropic-spreading
//! path factor `Gt * Gr * (lambda / 4 pi d)^2` applied to the transmitted
//! variance contrast, plus a scalar link calibration constant so sweeps can
//! be anchored to one measured operating point.

use thiserror::Error;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("carrier frequency must be positive, got {0} Hz")]
    NonPositiveFrequency(f64),
    #[error("transmitted contrast must be non-negative, got {0}")]
    NegativeContrast(f64),
    #[error("link calibration constant must be positive, got {0}")]
    NonPositiveCalibration(f64),
}

/// Antenna gains, carrier frequency, and the scalar calibration constant
/// that pins simulated contrasts to a measured link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudget {
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub frequency_hz: f64,
    /// Dimensionless scale factor fixed by anchoring the link to one known
    /// (rate, distance, error-rate) operating point.
    pub calibration_const: f64,
}

impl Default for LinkBudget {
    /// A pair of moderate-gain horns at the hydrogen-line band.
    fn default() -> Self {
        LinkBudget {
            tx_gain_dbi: 13.6,
            rx_gain_dbi: 13.6,
            frequency_hz: 1.42e9,
            calibration_const: 1.0,
        }
    }
}

fn dbi_to_linear(dbi: f64) -> f64 {
    10f64.powf(dbi / 10.0)
}

/// Dimensionless power transfer factor `Gt * Gr * (lambda / (4 pi d))^2`.
pub fn path_factor(link: &LinkBudget, distance_m: f64) -> Result<f64, ChannelError> {
    if distance_m <= 0.0 {
        return Err(ChannelError::NonPositiveDistance(distance_m));
    }
    if link.frequency_hz <= 0.0 {
        return Err(ChannelError::NonPositiveFrequency(link.frequency_hz));
    }
    let lambda = SPEED_OF_LIGHT / link.frequency_hz;
    let spreading = lambda / (4.0 * std::f64::consts::PI * distance_m);
    Ok(dbi_to_linear(link.tx_gain_dbi) * dbi_to_linear(link.rx_gain_dbi) * spreading * spreading)
}

/// Variance contrast at the receiver:
/// `calibration_const * path_factor * tx_contrast`.
pub fn received_contrast(
    tx_contrast: f64,
    link: &LinkBudget,
    distance_m: f64,
) -> Result<f64, ChannelError> {
    if tx_contrast < 0.0 {
        return Err(ChannelError::NegativeContrast(tx_contrast));
    }
    if link.calibration_const <= 0.0 {
        return Err(ChannelError::NonPositiveCalibration(link.calibration_const));
    }
    Ok(link.calibration_const * path_factor(link, distance_m)? * tx_contrast)
}

// ----------------------------------------------------------------------------
