//! On-off keying of a noise source on a square subcarrier, and the matching
//! radiometric demodulator.
//!
//! A transmitted `1` switches the noise source ON during the positive half
//! cycles of a square subcarrier and OFF during the negative halves; a `0`
//! leaves the source OFF for the whole bit. The receiver cannot correlate
//! against the noise itself (it is zero-mean), so the demodulator works on
//! instantaneous sample power: each bit's soft intensity is
//!
//! ```text
//! I = sum_k p[k] * c[k],    p[k] = s[k]^2,   c[k] = +-1 subcarrier
//! ```
//!
//! which is a Dicke-style switched-power measurement: the OFF half cycles are
//! subtracted from the ON half cycles, cancelling the receiver floor. A
//! 1-bit with variance contrast `d = sigma_on^2 - sigma_off^2` over `N`
//! samples has expected intensity `N*d/2`; a 0-bit has expectation zero.
//!
//! Packets are a Barker-7 preamble plus a fixed-length payload; alignment is
//! recovered by normalized correlation of the +-1-mapped preamble against
//! mean-centered soft intensities.
//!
//! Square-wave convention: the subcarrier is +1 on the first half cycle
//! `[0, T/2)` and -1 on `[T/2, T)`, evaluated at exact sample instants from
//! the bit-stream origin, so rounding never accumulates across bits. This
//! gives sgn(0) = +1 at the cycle start and assigns the midpoint crossing to
//! the negative half.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::receiver_model::{rng_for, ModelError, SampleStream, Samples};
use crate::stats::normal_sf;

/// Barker code of length 7, the packet preamble: `1110010`.
///
/// Its +-1 autocorrelation peaks at 7 with all off-peak lags bounded by 1 in
/// magnitude, which is what makes short-window correlation alignment work.
pub const BARKER7: [bool; 7] = [true, true, true, false, false, true, false];

#[derive(Debug, Error)]
pub enum ModemError {
    #[error("invalid modem config: {0}")]
    InvalidConfig(String),
    #[error("no bits to modulate")]
    EmptyBits,
    #[error("payload must be {expected} bits, got {got}")]
    WrongPayloadLength { expected: usize, got: usize },
    #[error("packet must be {expected} bits, got {got}")]
    WrongPacketLength { expected: usize, got: usize },
    #[error("preamble mismatch: not a packet")]
    PreambleMismatch,
    #[error("stream too short: need at least {needed} samples past the sync offset, got {got}")]
    StreamTooShort { needed: usize, got: usize },
    #[error("no packet found: best preamble correlation {best_correlation:.3} below floor")]
    NoPacket { best_correlation: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Which per-sample power feeds the intensity sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerMetric {
    /// Square of the real component (the default; matches a real-valued
    /// simulation chain and uses only one quadrature of captured IQ).
    RealSquared,
    /// Full complex magnitude squared, `re^2 + im^2`.
    MagnitudeSquared,
}

/// How the bit decision threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdPolicy {
    /// A fixed, externally supplied threshold (offline analysis style).
    Fixed(f64),
    /// Midpoint between the mean 1-intensity and mean 0-intensity of the
    /// preamble bits, learned per packet.
    PreambleMidpoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModemConfig {
    pub subcarrier_hz: f64,
    pub sample_rate_hz: f64,
    /// Subcarrier cycles integrated per bit; bit rate = subcarrier / cycles.
    pub cycles_per_bit: u32,
    pub threshold: ThresholdPolicy,
    pub preamble: Vec<bool>,
    pub payload_bits: usize,
    /// Minimum normalized preamble correlation for packet detection.
    pub correlation_floor: f64,
    pub power: PowerMetric,
}

impl Default for ModemConfig {
    fn default() -> Self {
        ModemConfig {
            subcarrier_hz: 100.0,
            sample_rate_hz: 4000.0,
            cycles_per_bit: 20,
            threshold: ThresholdPolicy::PreambleMidpoint,
            preamble: BARKER7.to_vec(),
            payload_bits: 13,
            correlation_floor: 0.5,
            power: PowerMetric::RealSquared,
        }
    }
}

impl ModemConfig {
    pub fn validate(&self) -> Result<(), ModemError> {
        if !(self.subcarrier_hz > 0.0) {
            return Err(ModemError::InvalidConfig(format!(
                "subcarrier must be positive, got {} Hz",
                self.subcarrier_hz
            )));
        }
        if self.sample_rate_hz < 20.0 * self.subcarrier_hz {
            return Err(ModemError::InvalidConfig(format!(
                "sample rate {} Hz is below 20x the {} Hz subcarrier",
                self.sample_rate_hz, self.subcarrier_hz
            )));
        }
        if self.cycles_per_bit == 0 {
            return Err(ModemError::InvalidConfig(
                "cycles_per_bit must be at least 1".into(),
            ));
        }
        if self.payload_bits == 0 {
            return Err(ModemError::InvalidConfig(
                "payload_bits must be at least 1".into(),
            ));
        }
        if self.preamble.is_empty() {
            return Err(ModemError::InvalidConfig("preamble must be non-empty".into()));
        }
        if !(0.0..=1.0).contains(&self.correlation_floor) {
            return Err(ModemError::InvalidConfig(format!(
                "correlation floor must be in [0, 1], got {}",
                self.correlation_floor
            )));
        }
        Ok(())
    }

    /// Bit rate in bits per second: subcarrier / cycles_per_bit.
    pub fn bit_rate(&self) -> f64 {
        self.subcarrier_hz / self.cycles_per_bit as f64
    }

    /// Nominal samples per bit (not necessarily an integer).
    pub fn samples_per_bit(&self) -> f64 {
        self.cycles_per_bit as f64 * self.sample_rate_hz / self.subcarrier_hz
    }

    /// Preamble plus payload length in bits.
    pub fn packet_bits(&self) -> usize {
        self.preamble.len() + self.payload_bits
    }

    /// Subcarrier phase (in cycles) at sample index `i`, measured from the
    /// stream origin. Multiplying before dividing keeps the result
    /// correctly rounded, so half-cycle and bit boundaries that are exactly
    /// representable (any rational rate pair in practice) classify exactly
    /// instead of drifting a sample at certain sample-rate ratios.
    fn cycle_pos(&self, i: f64) -> f64 {
        i * self.subcarrier_hz / self.sample_rate_hz
    }
}

/// Sign of the square subcarrier at a position measured in cycles:
/// +1 on [0, 0.5), -1 on [0.5, 1).
fn square_sign(cycle_pos: f64) -> f64 {
    if cycle_pos.rem_euclid(1.0) < 0.5 {
        1.0
    } else {
        -1.0
    }
}

/// The +-1 square subcarrier sampled at `n` instants, with an optional phase
/// offset expressed in samples. Pure waveform helper; no config validation.
pub fn subcarrier_wave(cfg: &ModemConfig, n: usize, phase_offset_samples: f64) -> Vec<f64> {
    (0..n)
        .map(|i| square_sign(cfg.cycle_pos(i as f64 + phase_offset_samples)))
        .collect()
}

/// The transmit switch schedule: one ON/OFF state per output sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchSchedule {
    pub states: Vec<bool>,
    pub sample_rate_hz: f64,
}

/// Expand bits into the switch schedule: a `1` follows the positive half
/// cycles of the subcarrier for `cycles_per_bit` cycles, a `0` holds OFF.
///
/// Bit boundaries and half-cycle signs are both evaluated from the exact
/// phase at each sample instant, so non-integer samples-per-half-cycle never
/// accumulates rounding error across the stream.
pub fn modulate(bits: &[bool], cfg: &ModemConfig) -> Result<SwitchSchedule, ModemError> {
    cfg.validate()?;
    if bits.is_empty() {
        return Err(ModemError::EmptyBits);
    }
    let cpb = cfg.cycles_per_bit as f64;
    let total = (bits.len() as f64 * cfg.samples_per_bit()).round() as usize;
    let mut states = Vec::with_capacity(total);
    for i in 0..total {
        let pos = cfg.cycle_pos(i as f64);
        let bit_idx = ((pos / cpb).floor() as usize).min(bits.len() - 1);
        states.push(bits[bit_idx] && square_sign(pos) > 0.0);
    }
    Ok(SwitchSchedule {
        states,
        sample_rate_hz: cfg.sample_rate_hz,
    })
}

/// Render a schedule into Gaussian samples: variance `sigma_sq_on` while the
/// switch is ON, `sigma_sq_off` while OFF. Deterministic per seed.
pub fn render_waveform(
    schedule: &SwitchSchedule,
    sigma_sq_on: f64,
    sigma_sq_off: f64,
    seed: u64,
) -> Result<SampleStream, ModemError> {
    let mut rng = rng_for(seed, 0);
    let mut stream = render_waveform_with(schedule, sigma_sq_on, sigma_sq_off, &mut rng)?;
    stream.seed = Some(seed);
    Ok(stream)
}

/// Render from a caller-managed RNG (one draw per sample, same consumption
/// pattern as stream synthesis).
pub fn render_waveform_with<R: Rng>(
    schedule: &SwitchSchedule,
    sigma_sq_on: f64,
    sigma_sq_off: f64,
    rng: &mut R,
) -> Result<SampleStream, ModemError> {
    if sigma_sq_on < 0.0 {
        return Err(ModelError::NegativeVariance(sigma_sq_on).into());
    }
    if sigma_sq_off < 0.0 {
        return Err(ModelError::NegativeVariance(sigma_sq_off).into());
    }
    let s_on = sigma_sq_on.sqrt();
    let s_off = sigma_sq_off.sqrt();
    let samples: Vec<f32> = schedule
        .states
        .iter()
        .map(|&on| {
            let z: f64 = rng.sample(StandardNormal);
            let sigma = if on { s_on } else { s_off };
            (z * sigma) as f32
        })
        .collect();
    Ok(SampleStream {
        samples: Samples::Real(samples),
        sample_rate_hz: schedule.sample_rate_hz,
        seed: None,
    })
}

fn sample_power(stream: &SampleStream, idx: usize, metric: PowerMetric) -> f64 {
    match (&stream.samples, metric) {
        (Samples::Real(v), _) => {
            let s = v[idx] as f64;
            s * s
        }
        (Samples::Complex(v), PowerMetric::RealSquared) => {
            let s = v[idx].re as f64;
            s * s
        }
        (Samples::Complex(v), PowerMetric::MagnitudeSquared) => {
            let re = v[idx].re as f64;
            let im = v[idx].im as f64;
            re * re + im * im
        }
    }
}

/// Integrate per-bit soft intensities from `sync_offset` onward: sample power
/// times the +-1 subcarrier, summed over each complete bit period.
pub fn bit_intensities(
    stream: &SampleStream,
    cfg: &ModemConfig,
    sync_offset: usize,
) -> Result<Vec<f64>, ModemError> {
    cfg.validate()?;
    let avail = stream.len().saturating_sub(sync_offset);
    let cpb = cfg.cycles_per_bit as f64;
    let n_bits = (cfg.cycle_pos(avail as f64) / cpb).floor() as usize;
    if n_bits == 0 {
        return Err(ModemError::StreamTooShort {
            needed: cfg.samples_per_bit().ceil() as usize,
            got: avail,
        });
    }
    let mut acc = vec![0.0f64; n_bits];
    for j in 0..avail {
        let pos = cfg.cycle_pos(j as f64);
        let bit_idx = (pos / cpb).floor() as usize;
        if bit_idx >= n_bits {
            break;
        }
        let p = sample_power(stream, sync_offset + j, cfg.power);
        acc[bit_idx] += p * square_sign(pos);
    }
    Ok(acc)
}

/// A demodulated stream: per-bit soft intensities, the hard decisions, and
/// the threshold that separated them.
#[derive(Debug, Clone, PartialEq)]
pub struct DemodResult {
    pub soft_intensities: Vec<f64>,
    pub decided_bits: Vec<bool>,
    pub threshold: f64,
}

/// Threshold midway between the preamble's 1-cluster and 0-cluster means.
fn preamble_midpoint(
    intensities: &[f64],
    preamble: &[bool],
) -> Result<f64, ModemError> {
    if intensities.len() < preamble.len() {
        return Err(ModemError::StreamTooShort {
            needed: preamble.len(),
            got: intensities.len(),
        });
    }
    let (mut ones, mut zeros) = (Vec::new(), Vec::new());
    for (i, &b) in preamble.iter().enumerate() {
        if b {
            ones.push(intensities[i]);
        } else {
            zeros.push(intensities[i]);
        }
    }
    if ones.is_empty() || zeros.is_empty() {
        return Err(ModemError::InvalidConfig(
            "preamble must contain both bit values for midpoint thresholding".into(),
        ));
    }
    let m1 = ones.iter().sum::<f64>() / ones.len() as f64;
    let m0 = zeros.iter().sum::<f64>() / zeros.len() as f64;
    Ok(0.5 * (m1 + m0))
}

/// Demodulate a stream assumed bit-aligned at `sync_offset`: integrate soft
/// intensities and slice them at the configured threshold. Under
/// `PreambleMidpoint` the stream's first preamble-length bits are taken to be
/// the preamble.
pub fn demodulate(
    stream: &SampleStream,
    cfg: &ModemConfig,
    sync_offset: usize,
) -> Result<DemodResult, ModemError> {
    let soft = bit_intensities(stream, cfg, sync_offset)?;
    let threshold = match cfg.threshold {
        ThresholdPolicy::Fixed(t) => t,
        ThresholdPolicy::PreambleMidpoint => preamble_midpoint(&soft, &cfg.preamble)?,
    };
    let decided = soft.iter().map(|&x| x > threshold).collect();
    Ok(DemodResult {
        soft_intensities: soft,
        decided_bits: decided,
        threshold,
    })
}

/// Prepend the preamble to a payload of exactly `cfg.payload_bits` bits.
pub fn frame(payload: &[bool], cfg: &ModemConfig) -> Result<Vec<bool>, ModemError> {
    if payload.len() != cfg.payload_bits {
        return Err(ModemError::WrongPayloadLength {
            expected: cfg.payload_bits,
            got: payload.len(),
        });
    }
    let mut packet = Vec::with_capacity(cfg.packet_bits());
    packet.extend_from_slice(&cfg.preamble);
    packet.extend_from_slice(payload);
    Ok(packet)
}

/// Validate the preamble of a packet-length bit block and return the payload.
pub fn deframe(bits: &[bool], cfg: &ModemConfig) -> Result<Vec<bool>, ModemError> {
    if bits.len() != cfg.packet_bits() {
        return Err(ModemError::WrongPacketLength {
            expected: cfg.packet_bits(),
            got: bits.len(),
        });
    }
    if bits[..cfg.preamble.len()] != cfg.preamble[..] {
        return Err(ModemError::PreambleMismatch);
    }
    Ok(bits[cfg.preamble.len()..].to_vec())
}

/// Result of packet detection over a soft-intensity sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketAlignment {
    /// Bit offset at which the packet starts.
    pub bit_offset: usize,
    /// Normalized preamble correlation at that offset, in [-1, 1].
    pub correlation: f64,
    /// Decision threshold learned from the aligned preamble (cluster
    /// midpoint).
    pub threshold: f64,
}

/// Find the packet start in a soft-intensity sequence by sliding the
/// +-1-mapped preamble over intensity windows and taking the highest Pearson
/// correlation (earliest offset wins ties). Centering both sides makes the
/// score invariant to intensity scale and floor, so any clean two-level
/// rendition of the preamble scores exactly 1. Offsets are only considered
/// where a whole packet still fits.
pub fn detect_packet(
    intensities: &[f64],
    cfg: &ModemConfig,
) -> Result<PacketAlignment, ModemError> {
    cfg.validate()?;
    let plen = cfg.preamble.len();
    let packet = cfg.packet_bits();
    if intensities.len() < packet {
        return Err(ModemError::StreamTooShort {
            needed: packet,
            got: intensities.len(),
        });
    }
    let pm: Vec<f64> = cfg
        .preamble
        .iter()
        .map(|&b| if b { 1.0 } else { -1.0 })
        .collect();
    let pmean = pm.iter().sum::<f64>() / plen as f64;
    let pc: Vec<f64> = pm.iter().map(|p| p - pmean).collect();
    let pnorm = pc.iter().map(|p| p * p).sum::<f64>().sqrt();
    if pnorm == 0.0 {
        return Err(ModemError::InvalidConfig(
            "preamble must contain both bit values for correlation".into(),
        ));
    }

    let mut best_offset = 0usize;
    let mut best_corr = f64::NEG_INFINITY;
    for offset in 0..=(intensities.len() - packet) {
        let window = &intensities[offset..offset + plen];
        let mean = window.iter().sum::<f64>() / plen as f64;
        let mut dot = 0.0;
        let mut norm_sq = 0.0;
        for (w, p) in window.iter().zip(&pc) {
            let centered = w - mean;
            dot += centered * p;
            norm_sq += centered * centered;
        }
        let corr = if norm_sq > 0.0 {
            dot / (norm_sq.sqrt() * pnorm)
        } else {
            0.0
        };
        if corr > best_corr {
            best_corr = corr;
            best_offset = offset;
        }
    }

    if best_corr < cfg.correlation_floor {
        return Err(ModemError::NoPacket {
            best_correlation: best_corr,
        });
    }
    let threshold = preamble_midpoint(&intensities[best_offset..], &cfg.preamble)?;
    Ok(PacketAlignment {
        bit_offset: best_offset,
        correlation: best_corr,
        threshold,
    })
}

/// Closed-form Gaussian-approximation bit error rate for the intensity
/// demodulator, assuming equiprobable bits.
///
/// Per-sample power has mean `sigma^2` and variance `2 sigma^4`, so over `N`
/// samples the 0-bit statistic is `Normal(0, 2 N off^2)` and the 1-bit
/// statistic `Normal(N d / 2, N (on^2 + off^2))` with `d = on - off`
/// (arguments are variances). The decision threshold defaults to the
/// midpoint `N d / 4`. This is an independent reference model: it shares no
/// code with the sample-domain demodulator.
pub fn analytic_ber(
    sigma_sq_on: f64,
    sigma_sq_off: f64,
    samples_per_bit: f64,
    threshold: Option<f64>,
) -> Result<f64, ModemError> {
    if !(samples_per_bit > 0.0) {
        return Err(ModemError::InvalidConfig(format!(
            "samples per bit must be positive, got {samples_per_bit}"
        )));
    }
    if sigma_sq_on < 0.0 || sigma_sq_off < 0.0 {
        return Err(ModemError::InvalidConfig(
            "variances must be non-negative".into(),
        ));
    }
    let n = samples_per_bit;
    let mean1 = 0.5 * n * (sigma_sq_on - sigma_sq_off);
    let theta = threshold.unwrap_or(0.5 * mean1);
    let var0 = 2.0 * n * sigma_sq_off * sigma_sq_off;
    let var1 = n * (sigma_sq_on * sigma_sq_on + sigma_sq_off * sigma_sq_off);

    // Tail probability of exceeding (or falling below) the threshold, with
    // degenerate zero-variance statistics handled as point masses.
    let upper_tail = |margin: f64, var: f64| -> f64 {
        if var > 0.0 {
            normal_sf(margin / var.sqrt())
        } else if margin > 0.0 {
            0.0
        } else if margin < 0.0 {
            1.0
        } else {
            0.5
        }
    };
    let ber0 = upper_tail(theta - 0.0, var0);
    let ber1 = upper_tail(mean1 - theta, var1);
    Ok(0.5 * (ber0 + ber1))
}

/// Render a bit sequence's packed hex representation, MSB first (13 bits ->
/// four hex digits).
pub fn bits_to_hex(bits: &[bool]) -> String {
    let mut value: u64 = 0;
    for &b in bits {
        value = (value << 1) | (b as u64);
    }
    let width = bits.len().div_ceil(4).max(1);
    format!("{value:0width$x}")
}

// ----------------------------------------------------------------------------
