//! Scenario files: a flat `key = value` text format.
//!
//! One setting per line; `#` starts a comment line; blank lines are
//! ignored. Keys are dotted lowercase paths (`modem.subcarrier_hz`), values
//! are numbers, strings, booleans, or comma-separated number lists. Every
//! experiment ships as an embedded preset (see [`preset`]) that also serves
//! as key documentation; unknown keys are rejected so typos fail loudly
//! instead of silently running defaults.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario line {line}: expected 'key = value', got {text:?}")]
    BadLine { line: usize, text: String },
    #[error("scenario line {line}: duplicate key {key:?}")]
    DuplicateKey { line: usize, key: String },
    #[error("unknown scenario key {key:?} (not accepted by this subcommand)")]
    UnknownKey { key: String },
    #[error("missing scenario key {0:?}")]
    MissingKey(String),
    #[error("scenario key {key:?}: {reason}")]
    BadValue { key: String, reason: String },
    #[error("unknown scenario preset {0:?}")]
    UnknownPreset(String),
    #[error("failed to read scenario: {0}")]
    Io(#[from] std::io::Error),
}

/// A parsed scenario: the key-value map plus the common fields every run
/// shares.
#[derive(Debug, Clone)]
pub struct Scenario {
    map: BTreeMap<String, String>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ScenarioError::BadLine {
                    line: line_no,
                    text: line.to_string(),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty()
                || !key
                    .chars()
                    .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '.' || c == '_')
            {
                return Err(ScenarioError::BadLine {
                    line: line_no,
                    text: raw.to_string(),
                });
            }
            if map.insert(key.clone(), value).is_some() {
                return Err(ScenarioError::DuplicateKey { line: line_no, key });
            }
        }
        Ok(Scenario { map })
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Override or insert a key (CLI flags land here).
    pub fn set(&mut self, key: &str, value: String) {
        self.map.insert(key.to_string(), value);
    }

    /// Reject any key that is neither in `exact` nor under one of the
    /// `prefixes`. Run this before extracting values so misspellings fail
    /// the whole run.
    pub fn check_keys(&self, exact: &[&str], prefixes: &[&str]) -> Result<(), ScenarioError> {
        for key in self.map.keys() {
            let ok = exact.contains(&key.as_str())
                || prefixes.iter().any(|p| key.starts_with(p));
            if !ok {
                return Err(ScenarioError::UnknownKey { key: key.clone() });
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, ScenarioError> {
        self.get(key)
            .ok_or_else(|| ScenarioError::MissingKey(key.to_string()))
    }

    fn parse_as<T: std::str::FromStr>(&self, key: &str, raw: &str) -> Result<T, ScenarioError>
    where
        T::Err: std::fmt::Display,
    {
        raw.parse::<T>().map_err(|e| ScenarioError::BadValue {
            key: key.to_string(),
            reason: format!("{e}: {raw:?}"),
        })
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64, ScenarioError> {
        match self.get(key) {
            Some(raw) => self.parse_as(key, raw),
            None => Ok(default),
        }
    }

    pub fn require_f64(&self, key: &str) -> Result<f64, ScenarioError> {
        let raw = self.require(key)?;
        self.parse_as(key, raw)
    }

    pub fn get_u64(&self, key: &str, default: u64) -> Result<u64, ScenarioError> {
        match self.get(key) {
            Some(raw) => self.parse_as(key, raw),
            None => Ok(default),
        }
    }

    pub fn get_u32(&self, key: &str, default: u32) -> Result<u32, ScenarioError> {
        match self.get(key) {
            Some(raw) => self.parse_as(key, raw),
            None => Ok(default),
        }
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize, ScenarioError> {
        match self.get(key) {
            Some(raw) => self.parse_as(key, raw),
            None => Ok(default),
        }
    }

    pub fn get_bool(&self, key: &str, default: bool) -> Result<bool, ScenarioError> {
        match self.get(key) {
            Some("true") | Some("yes") | Some("on") => Ok(true),
            Some("false") | Some("no") | Some("off") => Ok(false),
            Some(other) => Err(ScenarioError::BadValue {
                key: key.to_string(),
                reason: format!("expected a boolean, got {other:?}"),
            }),
            None => Ok(default),
        }
    }

    /// Comma-separated number list, e.g. `1.8, 2.8, 3.7`.
    pub fn require_f64_list(&self, key: &str) -> Result<Vec<f64>, ScenarioError> {
        let raw = self.require(key)?;
        let mut out = Vec::new();
        for part in raw.split(',') {
            let part = part.trim();
            out.push(self.parse_as::<f64>(key, part)?);
        }
        if out.is_empty() {
            return Err(ScenarioError::BadValue {
                key: key.to_string(),
                reason: "empty list".into(),
            });
        }
        Ok(out)
    }

    // Common fields -----------------------------------------------------

    pub fn name(&self) -> String {
        self.get("name").unwrap_or("unnamed").to_string()
    }

    pub fn seed(&self) -> Result<u64, ScenarioError> {
        self.get_u64("seed", 1)
    }

    pub fn trials(&self) -> Result<u64, ScenarioError> {
        let t = self.get_u64("trials", 1)?;
        if t == 0 {
            return Err(ScenarioError::BadValue {
                key: "trials".into(),
                reason: "must be at least 1".into(),
            });
        }
        Ok(t)
    }

    /// Keys shared by every subcommand.
    pub const COMMON_KEYS: &'static [&'static str] = &["name", "seed", "trials", "out"];
}

/// Modem settings under the `modem.` prefix, with library defaults for
/// anything unset.
pub fn modem_config(sc: &Scenario) -> Result<noiselink::ModemConfig, ScenarioError> {
    let mut cfg = noiselink::ModemConfig::default();
    cfg.subcarrier_hz = sc.get_f64("modem.subcarrier_hz", cfg.subcarrier_hz)?;
    cfg.sample_rate_hz = sc.get_f64("modem.sample_rate_hz", cfg.sample_rate_hz)?;
    cfg.cycles_per_bit = sc.get_u32("modem.cycles_per_bit", cfg.cycles_per_bit)?;
    cfg.payload_bits = sc.get_usize("modem.payload_bits", cfg.payload_bits)?;
    cfg.correlation_floor = sc.get_f64("modem.correlation_floor", cfg.correlation_floor)?;
    match sc.get("modem.threshold") {
        None | Some("preamble_midpoint") => {}
        Some(raw) => {
            if let Some(v) = raw.strip_prefix("fixed:") {
                let v: f64 = v.trim().parse().map_err(|e| ScenarioError::BadValue {
                    key: "modem.threshold".into(),
                    reason: format!("{e}: {raw:?}"),
                })?;
                cfg.threshold = noiselink::ThresholdPolicy::Fixed(v);
            } else {
                return Err(ScenarioError::BadValue {
                    key: "modem.threshold".into(),
                    reason: format!(
                        "expected 'preamble_midpoint' or 'fixed:<value>', got {raw:?}"
                    ),
                });
            }
        }
    }
    match sc.get("modem.power") {
        None | Some("real") => {}
        Some("magnitude") => cfg.power = noiselink::modem::PowerMetric::MagnitudeSquared,
        Some(other) => {
            return Err(ScenarioError::BadValue {
                key: "modem.power".into(),
                reason: format!("expected 'real' or 'magnitude', got {other:?}"),
            })
        }
    }
    Ok(cfg)
}

/// Receiver chain settings under the `chain.` prefix.
pub fn receiver_chain(sc: &Scenario) -> Result<noiselink::ReceiverChain, ScenarioError> {
    let mut chain = noiselink::ReceiverChain::default();
    chain.gain_rx = sc.get_f64("chain.gain_rx", chain.gain_rx)?;
    chain.offset = sc.get_f64("chain.offset", chain.offset)?;
    chain.bandwidth_hz = sc.get_f64("chain.bandwidth_hz", chain.bandwidth_hz)?;
    chain.shunt_ohms = sc.get_f64("chain.shunt_ohms", chain.shunt_ohms)?;
    chain.lna_noise_temp_k = sc.get_f64("chain.lna_noise_temp_k", chain.lna_noise_temp_k)?;
    Ok(chain)
}

/// Link budget settings under the `link.` prefix.
pub fn link_budget(sc: &Scenario) -> Result<noiselink::LinkBudget, ScenarioError> {
    let mut link = noiselink::LinkBudget::default();
    link.tx_gain_dbi = sc.get_f64("link.tx_gain_dbi", link.tx_gain_dbi)?;
    link.rx_gain_dbi = sc.get_f64("link.rx_gain_dbi", link.rx_gain_dbi)?;
    link.frequency_hz = sc.get_f64("link.frequency_hz", link.frequency_hz)?;
    Ok(link)
}

/// Embedded scenario presets, one per shipped experiment. These are the
/// defaults each subcommand runs without `--scenario`, and double as format
/// documentation.
pub fn preset(name: &str) -> Result<&'static str, ScenarioError> {
    match name {
        "feedthrough" => Ok(include_str!("../scenarios/feedthrough.scn")),
        "tempmod" => Ok(include_str!("../scenarios/tempmod.scn")),
        "calibration" => Ok(include_str!("../scenarios/calibration.scn")),
        "histogram" => Ok(include_str!("../scenarios/histogram.scn")),
        "sweep" => Ok(include_str!("../scenarios/sweep.scn")),
        other => Err(ScenarioError::UnknownPreset(other.to_string())),
    }
}

pub fn preset_names() -> &'static [&'static str] {
    &["feedthrough", "tempmod", "calibration", "histogram", "sweep"]
}
