//! First-principles thermal (Johnson) noise: mean-square voltage of a
//! resistor, available noise power, and the resistive voltage divider formed
//! by a source impedance feeding a receiver's shunt resistance.
//!
//! The core relations:
//!
//! ```text
//! <V^2>     = 4 k T B R          (open-circuit mean-square voltage)
//! P_avail   = k T B              (power into a matched load)
//! g         = R2 / (R1 + R2)     (divider gain from source R1 into shunt R2)
//! <V_obs^2> = 4 k T B R1 g^2     (mean-square voltage across the shunt)
//! ```
//!
//! where `k` is Boltzmann's constant, `T` the physical temperature in kelvin,
//! `B` the bandwidth in Hz, and resistances are in ohms.

use thiserror::Error;

/// Boltzmann's constant in J/K (exact, 2019 SI).
pub const BOLTZMANN: f64 = 1.380_649e-23;

#[derive(Debug, Error, PartialEq)]
pub enum PhysicsError {
    #[error("bandwidth must be positive, got {0} Hz")]
    NonPositiveBandwidth(f64),
    #[error("temperature must be non-negative, got {0} K")]
    NegativeTemperature(f64),
    #[error("resistance must be non-negative, got {0} ohms")]
    NegativeResistance(f64),
    #[error("divider needs a positive total resistance")]
    DegenerateDivider,
    #[error("kTB multiple is undefined at zero physical temperature")]
    ZeroTemperature,
}

/// A noise source: a resistive impedance at a physical temperature.
///
/// The reactive part is carried for bookkeeping (measured source impedances
/// are rarely purely real) but only the resistive part enters the noise
/// formulas.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadProfile {
    pub name: String,
    pub resistance_ohms: f64,
    pub reactance_ohms: f64,
    pub temperature_k: f64,
}

impl LoadProfile {
    pub fn new(name: &str, resistance_ohms: f64, temperature_k: f64) -> Self {
        LoadProfile {
            name: name.to_string(),
            resistance_ohms,
            reactance_ohms: 0.0,
            temperature_k,
        }
    }

    /// An antenna left unterminated: high source resistance.
    pub fn open(temperature_k: f64) -> Self {
        LoadProfile::new("open", 17_000.0, temperature_k)
    }

    /// A shorted input: near-zero source resistance.
    pub fn short(temperature_k: f64) -> Self {
        LoadProfile::new("short", 0.254, temperature_k)
    }

    /// A matched 50-ohm termination.
    pub fn matched(temperature_k: f64) -> Self {
        LoadProfile::new("matched", 50.0, temperature_k)
    }

    /// Named presets used by the scenario runners and tests:
    /// `fifty_296`, `fifty_273`, `fifty_77`, `open_296`, `short_296`, and
    /// `lna_input` (a matched source at the receiver's own noise
    /// temperature, which is what the LNA sees from a quiet antenna).
    pub fn preset(name: &str) -> Option<Self> {
        let load = match name {
            "fifty_296" => LoadProfile::new("fifty_296", 50.0, 296.0),
            "fifty_273" => LoadProfile::new("fifty_273", 50.0, 273.0),
            "fifty_77" => LoadProfile::new("fifty_77", 50.0, 77.0),
            "open_296" => {
                let mut l = LoadProfile::open(296.0);
                l.name = "open_296".to_string();
                l
            }
            "short_296" => {
                let mut l = LoadProfile::short(296.0);
                l.name = "short_296".to_string();
                l
            }
            "lna_input" => LoadProfile::new("lna_input", 50.0, 39.5),
            _ => return None,
        };
        Some(load)
    }

    /// All named presets, in a fixed order.
    pub fn presets() -> Vec<LoadProfile> {
        ["fifty_296", "fifty_273", "fifty_77", "open_296", "short_296", "lna_input"]
            .iter()
            .map(|n| LoadProfile::preset(n).unwrap())
            .collect()
    }

    fn validate(&self) -> Result<(), PhysicsError> {
        if self.resistance_ohms < 0.0 {
            return Err(PhysicsError::NegativeResistance(self.resistance_ohms));
        }
        if self.temperature_k < 0.0 {
            return Err(PhysicsError::NegativeTemperature(self.temperature_k));
        }
        Ok(())
    }
}

/// Open-circuit mean-square noise voltage `4 k T B R` of a load, in V^2.
///
/// Zero at zero temperature; linear in each of T, B, and R.
pub fn johnson_msv(load: &LoadProfile, bandwidth_hz: f64) -> Result<f64, PhysicsError> {
    load.validate()?;
    if bandwidth_hz <= 0.0 {
        return Err(PhysicsError::NonPositiveBandwidth(bandwidth_hz));
    }
    Ok(4.0 * BOLTZMANN * load.temperature_k * bandwidth_hz * load.resistance_ohms)
}

/// Noise power `k T B` (watts) available into a matched load.
pub fn available_noise_power(temperature_k: f64, bandwidth_hz: f64) -> Result<f64, PhysicsError> {
    if temperature_k < 0.0 {
        return Err(PhysicsError::NegativeTemperature(temperature_k));
    }
    if bandwidth_hz <= 0.0 {
        return Err(PhysicsError::NonPositiveBandwidth(bandwidth_hz));
    }
    Ok(BOLTZMANN * temperature_k * bandwidth_hz)
}

/// Convert a power in watts to dBm.
pub fn power_dbm(watts: f64) -> f64 {
    10.0 * (watts / 1e-3).log10()
}

/// Voltage divider gain `R2 / (R1 + R2)` from a source resistance into the
/// receiver shunt.
pub fn divider_gain(source_ohms: f64, shunt_ohms: f64) -> Result<f64, PhysicsError> {
    if source_ohms < 0.0 {
        return Err(PhysicsError::NegativeResistance(source_ohms));
    }
    if shunt_ohms < 0.0 {
        return Err(PhysicsError::NegativeResistance(shunt_ohms));
    }
    if source_ohms + shunt_ohms <= 0.0 {
        return Err(PhysicsError::DegenerateDivider);
    }
    Ok(shunt_ohms / (source_ohms + shunt_ohms))
}

/// Mean-square voltage observed across the shunt: `4 k T B R1 g^2`.
///
/// For a matched source (`R1 == R2`) this reduces to exactly `R2 * kTB`,
/// which is also its maximum over source resistances.
pub fn observed_msv(
    load: &LoadProfile,
    bandwidth_hz: f64,
    shunt_ohms: f64,
) -> Result<f64, PhysicsError> {
    let g = divider_gain(load.resistance_ohms, shunt_ohms)?;
    Ok(johnson_msv(load, bandwidth_hz)? * g * g)
}

/// Observed mean-square voltage expressed as a multiple of `k T B`, i.e.
/// `4 R1 g^2` (a resistance, in ohms). Temperature and bandwidth cancel in
/// the ratio, but a zero physical temperature makes the ratio undefined.
pub fn ktb_multiple(load: &LoadProfile, shunt_ohms: f64) -> Result<f64, PhysicsError> {
    load.validate()?;
    if load.temperature_k == 0.0 {
        return Err(PhysicsError::ZeroTemperature);
    }
    let g = divider_gain(load.resistance_ohms, shunt_ohms)?;
    Ok(4.0 * load.resistance_ohms * g * g)
}

// ----------------------------------------------------------------------------
