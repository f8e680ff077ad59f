//! The experiment runners behind each CLI subcommand.
//!
//! Each runner takes a parsed [`Scenario`], executes a deterministic
//! simulation keyed by the scenario seed, writes CSV/JSON results into the
//! output directory, and returns a typed report so tests can assert on the
//! numbers without re-parsing files.
//!
//! Randomness discipline: every independent Monte-Carlo trial draws from
//! substream `(seed, trial_index)`, so trial results are independent of
//! execution order and thread count, and sweeps reuse the same substreams
//! across grid points (common random numbers) to make per-trial
//! comparisons across distances exact rather than statistical.

use std::path::Path;

use noiselink::calibration::{
    extract_noise_temp, fit_line, reference_fit, CalibrationError, CalibrationPoint,
    REFERENCE_INTERCEPT, REFERENCE_SLOPE,
};
use noiselink::channel::{path_factor, ChannelError};
use noiselink::iq_ingest::{hampel_filter, read_iq, HampelConfig, IqError, IqFileHeader};
use noiselink::modem::{
    analytic_ber, bit_intensities, bits_to_hex, deframe, detect_packet, frame, modulate,
    render_waveform_with, ModemError,
};
use noiselink::noise_physics::{LoadProfile, PhysicsError};
use noiselink::receiver_model::{mean_square, rng_for, Complex32, ModelError, SampleStream, Samples};
use noiselink::stats::{chi_square_gof, ks_two_sample, normal_cdf, wilson_interval};
use noiselink::trials;
use noiselink::ModemConfig;
use rand::Rng;
use serde::Serialize;

use crate::output::{fmt, OutDir, OutputError, RunMeta};
use crate::scenario::{link_budget, modem_config, receiver_chain, Scenario, ScenarioError};

/// 95% two-sided normal quantile, the z used for all Wilson intervals here.
const WILSON_Z: f64 = 1.959_963_984_540_054;

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Modem(#[from] ModemError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Iq(#[from] IqError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("link not anchored: {0}")]
    Anchor(String),
}

impl RunnerError {
    /// CLI exit code category: 2 config, 3 parse, 4 domain, 5 io.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunnerError::Scenario(e) => match e {
                ScenarioError::Io(_) => 5,
                ScenarioError::BadLine { .. } | ScenarioError::DuplicateKey { .. } => 3,
                _ => 2,
            },
            RunnerError::Modem(ModemError::InvalidConfig(_)) => 2,
            RunnerError::Modem(_) => 4,
            RunnerError::Model(_) | RunnerError::Physics(_) | RunnerError::Channel(_) => 4,
            RunnerError::Calibration(e) => match e {
                CalibrationError::Io(_) => 5,
                CalibrationError::BadRecord { .. } | CalibrationError::EmptyFile => 3,
                _ => 4,
            },
            RunnerError::Iq(e) => match e {
                IqError::UnknownFormat(_) => 2,
                IqError::Truncated { .. } | IqError::BadCsv { .. } | IqError::BadHeader(_) => 3,
                IqError::EmptyStream | IqError::TooShort { .. } => 4,
                IqError::Io(_) => 5,
            },
            RunnerError::Output(_) => 5,
            RunnerError::Anchor(_) => 2,
        }
    }
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

struct HistBin {
    lo: f64,
    hi: f64,
    count: u64,
}

/// Equal-width histogram over an explicit range; the final bin includes its
/// upper edge so the maximum is never dropped.
fn bin_values(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<HistBin> {
    let bins = bins.max(1);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut out: Vec<HistBin> = (0..bins)
        .map(|i| HistBin {
            lo: lo + i as f64 * width,
            hi: lo + (i + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for &v in values {
        let mut idx = ((v - lo) / width).floor() as isize;
        if idx < 0 {
            idx = 0;
        }
        if idx as usize >= bins {
            idx = bins as isize - 1;
        }
        out[idx as usize].count += 1;
    }
    out
}

fn write_histogram_csv(
    out: &OutDir,
    file: &str,
    bins: &[HistBin],
    total: usize,
) -> Result<(), OutputError> {
    let rows: Vec<Vec<String>> = bins
        .iter()
        .map(|b| {
            let width = b.hi - b.lo;
            let density = if total > 0 && width > 0.0 {
                b.count as f64 / (total as f64 * width)
            } else {
                0.0
            };
            vec![
                fmt(b.lo),
                fmt(b.hi),
                fmt(0.5 * (b.lo + b.hi)),
                b.count.to_string(),
                fmt(density),
            ]
        })
        .collect();
    out.write_csv(
        file,
        &["bin_lo", "bin_hi", "bin_center", "count", "density"],
        &rows,
    )
}

fn random_bits<R: Rng>(rng: &mut R, n: usize) -> Vec<bool> {
    (0..n).map(|_| rng.random::<bool>()).collect()
}

fn count_errors(decided: &[bool], sent: &[bool]) -> u64 {
    decided.iter().zip(sent).filter(|(a, b)| a != b).count() as u64
}

fn min_max(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

// ---------------------------------------------------------------------------
// feedthrough
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct FeedthroughReport {
    pub variant: String,
    pub n_bits: u64,
    pub sigma_sq_on: f64,
    pub sigma_sq_off: f64,
    pub samples_per_bit: f64,
    pub threshold: f64,
    pub errors: u64,
    pub bit_error_rate: f64,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
    /// True when the 0-bit and 1-bit intensity populations differ at the
    /// 0.01 level.
    pub separable: bool,
}

/// Switch-feedthrough control: random bits through the full modem chain at
/// the variant's ON/OFF variances, then ask whether the 0-bit and 1-bit
/// intensity populations can be told apart at all.
///
/// The decision threshold is the analytic midpoint `N (on - off) / 4`
/// computed from the configured variances (zero for the zero-contrast
/// controls), since a control run has no packet structure to learn from.
pub fn run_feedthrough(
    sc: &Scenario,
    variant: &str,
    out_root: &Path,
) -> Result<FeedthroughReport, RunnerError> {
    sc.check_keys(
        Scenario::COMMON_KEYS,
        &["modem.", "feedthrough."],
    )?;
    match variant {
        "open_open" | "fifty_fifty" | "open_fifty" => {}
        other => {
            return Err(ScenarioError::BadValue {
                key: "feedthrough.variant".into(),
                reason: format!(
                    "expected open_open, fifty_fifty, or open_fifty, got {other:?}"
                ),
            }
            .into())
        }
    }
    let cfg = modem_config(sc)?;
    cfg.validate()?;
    let sigma_on = sc.require_f64(&format!("feedthrough.{variant}.on_sigma_sq"))?;
    let sigma_off = sc.require_f64(&format!("feedthrough.{variant}.off_sigma_sq"))?;
    let n_bits = sc.get_u64("feedthrough.bits", 5000)?;
    let bins = sc.get_usize("feedthrough.bins", 60)?;
    let seed = sc.seed()?;

    let mut rng = rng_for(seed, 0);
    let sent = random_bits(&mut rng, n_bits as usize);
    let schedule = modulate(&sent, &cfg)?;
    let stream = render_waveform_with(&schedule, sigma_on, sigma_off, &mut rng)?;
    let soft = bit_intensities(&stream, &cfg, 0)?;

    let spb = cfg.samples_per_bit();
    let threshold = spb * (sigma_on - sigma_off) / 4.0;
    let decided: Vec<bool> = soft.iter().map(|&x| x > threshold).collect();
    let errors = count_errors(&decided, &sent);
    let ber = errors as f64 / n_bits as f64;

    let zeros: Vec<f64> = soft
        .iter()
        .zip(&sent)
        .filter(|(_, &b)| !b)
        .map(|(&x, _)| x)
        .collect();
    let ones: Vec<f64> = soft
        .iter()
        .zip(&sent)
        .filter(|(_, &b)| b)
        .map(|(&x, _)| x)
        .collect();
    let ks = ks_two_sample(&zeros, &ones);

    let out = OutDir::create(out_root)?;
    let (lo, hi) = min_max(&soft);
    write_histogram_csv(&out, "hist_bits0.csv", &bin_values(&zeros, lo, hi, bins), zeros.len())?;
    write_histogram_csv(&out, "hist_bits1.csv", &bin_values(&ones, lo, hi, bins), ones.len())?;

    let report = FeedthroughReport {
        variant: variant.to_string(),
        n_bits,
        sigma_sq_on: sigma_on,
        sigma_sq_off: sigma_off,
        samples_per_bit: spb,
        threshold,
        errors,
        bit_error_rate: ber,
        ks_statistic: ks.statistic,
        ks_p_value: ks.p_value,
        separable: ks.p_value < 0.01,
    };
    out.write_json("results.json", &report)?;
    out.write_meta(&RunMeta::new(sc.name(), "feedthrough", seed, n_bits))?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// tempmod
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct TempmodReport {
    pub packets_attempted: u64,
    pub packets_decoded: u64,
    pub payload_bits: u64,
    pub payload_errors: u64,
    pub ber: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub sigma_sq_on: f64,
    pub sigma_sq_off: f64,
    pub bit_rate_bps: f64,
    pub swap: bool,
    /// Error rate of the decided payload against the complement of what was
    /// sent; meaningful for swap runs, where it should be near zero.
    pub ber_vs_complement: f64,
}

struct TempmodTrial {
    decoded: bool,
    errors: u64,
    complement_errors: u64,
    row: Vec<String>,
    ones: Vec<f64>,
    zeros: Vec<f64>,
    first_packet: Option<Vec<(f64, bool)>>,
}

/// Temperature-modulation experiment: packets rendered at the hot/cold
/// variance pair, found by preamble correlation behind idle padding, and
/// decoded with a per-packet learned threshold.
///
/// With `tempmod.swap = true` the ON state renders at the *cold* variance:
/// packets are demodulated at known alignment and the decided payload is
/// expected to complement the sent one (the learned midpoint threshold
/// flips with the intensity sign).
pub fn run_tempmod(sc: &Scenario, out_root: &Path) -> Result<TempmodReport, RunnerError> {
    sc.check_keys(Scenario::COMMON_KEYS, &["modem.", "tempmod."])?;
    let cfg = modem_config(sc)?;
    cfg.validate()?;
    let sigma_on = sc.get_f64("tempmod.on_sigma_sq", 0.0676)?;
    let sigma_off = sc.get_f64("tempmod.off_sigma_sq", 0.0333)?;
    let swap = sc.get_bool("tempmod.swap", false)?;
    let bins = sc.get_usize("tempmod.bins", 60)?;
    let packets = sc.trials()?;
    let seed = sc.seed()?;

    let (render_on, render_off) = if swap {
        (sigma_off, sigma_on)
    } else {
        (sigma_on, sigma_off)
    };

    let run_one = |t: u64| -> Result<TempmodTrial, RunnerError> {
        let mut rng = rng_for(seed, t);
        let payload = random_bits(&mut rng, cfg.payload_bits);
        let packet = frame(&payload, &cfg)?;

        let (soft, offset, correlation, threshold) = if swap {
            let schedule = modulate(&packet, &cfg)?;
            let stream = render_waveform_with(&schedule, render_on, render_off, &mut rng)?;
            let soft = bit_intensities(&stream, &cfg, 0)?;
            // Aligned demodulation; threshold learned from the preamble.
            let thr = match detect_threshold(&soft, &cfg) {
                Some(t) => t,
                None => 0.0,
            };
            (soft, 0usize, 1.0, thr)
        } else {
            let lead = 2 + (t % 4) as usize;
            let mut bits = vec![false; lead];
            bits.extend(&packet);
            bits.push(false);
            let schedule = modulate(&bits, &cfg)?;
            let stream = render_waveform_with(&schedule, render_on, render_off, &mut rng)?;
            let soft = bit_intensities(&stream, &cfg, 0)?;
            match detect_packet(&soft, &cfg) {
                Ok(align) => (soft, align.bit_offset, align.correlation, align.threshold),
                Err(ModemError::NoPacket { best_correlation }) => {
                    (soft, 0, best_correlation, 0.0)
                }
                Err(e) => return Err(e.into()),
            }
        };

        let window = &soft[offset..offset + cfg.packet_bits()];
        let decided: Vec<bool> = window.iter().map(|&x| x > threshold).collect();
        let decoded_payload = deframe(&decided, &cfg).ok();
        let decided_payload = &decided[cfg.preamble.len()..];
        let errors = count_errors(decided_payload, &payload);
        let complement: Vec<bool> = payload.iter().map(|&b| !b).collect();
        let complement_errors = count_errors(decided_payload, &complement);

        let mut ones = Vec::new();
        let mut zeros = Vec::new();
        for (i, &b) in packet.iter().enumerate() {
            if b {
                ones.push(window[i]);
            } else {
                zeros.push(window[i]);
            }
        }

        let row = vec![
            t.to_string(),
            offset.to_string(),
            fmt(correlation),
            fmt(threshold),
            bits_to_hex(&payload),
            bits_to_hex(decided_payload),
            errors.to_string(),
            decoded_payload.is_some().to_string(),
        ];
        let first_packet = (t == 0).then(|| {
            window
                .iter()
                .zip(&decided)
                .map(|(&x, &d)| (x, d))
                .collect()
        });
        Ok(TempmodTrial {
            decoded: decoded_payload.is_some(),
            errors,
            complement_errors,
            row,
            ones,
            zeros,
            first_packet,
        })
    };

    let outcomes = trials::run(packets, run_one);
    let mut trials_ok = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        trials_ok.push(o?);
    }

    let payload_bits = packets * cfg.payload_bits as u64;
    let payload_errors: u64 = trials_ok.iter().map(|t| t.errors).sum();
    let complement_errors: u64 = trials_ok.iter().map(|t| t.complement_errors).sum();
    let decoded = trials_ok.iter().filter(|t| t.decoded).count() as u64;
    let ber = payload_errors as f64 / payload_bits as f64;
    let ci = wilson_interval(payload_errors, payload_bits, WILSON_Z);

    let out = OutDir::create(out_root)?;
    let rows: Vec<Vec<String>> = trials_ok.iter().map(|t| t.row.clone()).collect();
    out.write_csv(
        "packets.csv",
        &[
            "packet",
            "detected_offset",
            "correlation",
            "threshold",
            "payload_sent_hex",
            "payload_decoded_hex",
            "bit_errors",
            "deframed",
        ],
        &rows,
    )?;

    if let Some(first) = trials_ok.iter().find_map(|t| t.first_packet.as_ref()) {
        let rows: Vec<Vec<String>> = first
            .iter()
            .enumerate()
            .map(|(i, &(x, d))| vec![i.to_string(), fmt(x), (d as u8).to_string()])
            .collect();
        out.write_csv("intensities.csv", &["bit_index", "intensity", "decision"], &rows)?;
    }

    let all_ones: Vec<f64> = trials_ok.iter().flat_map(|t| t.ones.iter().copied()).collect();
    let all_zeros: Vec<f64> = trials_ok.iter().flat_map(|t| t.zeros.iter().copied()).collect();
    let mut everything = all_ones.clone();
    everything.extend_from_slice(&all_zeros);
    let (lo, hi) = min_max(&everything);
    write_histogram_csv(&out, "hist_bits0.csv", &bin_values(&all_zeros, lo, hi, bins), all_zeros.len())?;
    write_histogram_csv(&out, "hist_bits1.csv", &bin_values(&all_ones, lo, hi, bins), all_ones.len())?;

    let report = TempmodReport {
        packets_attempted: packets,
        packets_decoded: decoded,
        payload_bits,
        payload_errors,
        ber,
        wilson_lo: ci.lo,
        wilson_hi: ci.hi,
        sigma_sq_on: sigma_on,
        sigma_sq_off: sigma_off,
        bit_rate_bps: cfg.bit_rate(),
        swap,
        ber_vs_complement: complement_errors as f64 / payload_bits as f64,
    };
    out.write_json("results.json", &report)?;
    out.write_meta(&RunMeta::new(sc.name(), "tempmod", seed, packets))?;
    Ok(report)
}

/// Preamble-midpoint threshold over the first preamble-length intensities,
/// or None when the preamble is single-valued.
fn detect_threshold(soft: &[f64], cfg: &ModemConfig) -> Option<f64> {
    let plen = cfg.preamble.len();
    if soft.len() < plen {
        return None;
    }
    let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0u32, 0.0, 0u32);
    for (i, &b) in cfg.preamble.iter().enumerate() {
        if b {
            s1 += soft[i];
            n1 += 1;
        } else {
            s0 += soft[i];
            n0 += 1;
        }
    }
    if n1 == 0 || n0 == 0 {
        return None;
    }
    Some(0.5 * (s1 / n1 as f64 + s0 / n0 as f64))
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct CalibrationReport {
    pub truth_mode: String,
    pub samples_per_point: usize,
    pub temperatures_k: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub se_slope: f64,
    pub se_intercept: f64,
    pub reference_slope: f64,
    pub reference_intercept: f64,
    pub slope_within_3se: bool,
    pub intercept_within_3se: bool,
    pub probes: Vec<ProbeRow>,
    pub note: String,
}

#[derive(Debug, Serialize)]
pub struct ProbeRow {
    pub name: String,
    pub msv: f64,
    pub noise_temp_from_fit: f64,
    pub noise_temp_from_reference: f64,
}

/// Synthesize known-temperature streams, re-fit the variance-vs-temperature
/// line, and invert probe readings into noise temperatures.
///
/// `calibration.truth = fit_line` (default) draws each point's true variance
/// from the reference line, so the reference slope and intercept are the
/// exact parameters being recovered. `truth = chain` instead predicts each
/// variance through the receiver chain at 50 ohms, in which case the
/// intercept equals the chain offset by construction.
///
/// Standard errors use the known per-point sampling variance of a mean of
/// squares, `Var = 2 sigma^4 / N` — available here because the generator is
/// known, which is exactly the luxury a simulation has.
pub fn run_calibration(sc: &Scenario, out_root: &Path) -> Result<CalibrationReport, RunnerError> {
    sc.check_keys(Scenario::COMMON_KEYS, &["chain.", "calibration."])?;
    let chain = receiver_chain(sc)?;
    let truth = sc.get("calibration.truth").unwrap_or("fit_line").to_string();
    let n = sc.get_usize("calibration.samples_per_point", 6_000_000)?;
    let temps = match sc.get("calibration.temperatures_k") {
        Some(_) => sc.require_f64_list("calibration.temperatures_k")?,
        None => vec![296.0, 273.0, 77.0],
    };
    let seed = sc.seed()?;
    if temps.len() < 2 {
        return Err(ScenarioError::BadValue {
            key: "calibration.temperatures_k".into(),
            reason: "need at least two temperatures".into(),
        }
        .into());
    }

    let truth_msv = |t: f64| -> Result<f64, RunnerError> {
        match truth.as_str() {
            "fit_line" => Ok(reference_fit().at(t)),
            "chain" => {
                let load = LoadProfile::new("cal_fifty", 50.0, t);
                Ok(chain.predicted_variance(&load)?)
            }
            other => Err(ScenarioError::BadValue {
                key: "calibration.truth".into(),
                reason: format!("expected fit_line or chain, got {other:?}"),
            }
            .into()),
        }
    };

    let mut points = Vec::with_capacity(temps.len());
    let mut truths = Vec::with_capacity(temps.len());
    for (i, &t) in temps.iter().enumerate() {
        let sigma_sq = truth_msv(t)?;
        let mut rng = rng_for(seed, i as u64);
        let stream = noiselink::receiver_model::synthesize_with(sigma_sq, n, 1e6, &mut rng)?;
        let est = mean_square(&stream)?;
        truths.push(sigma_sq);
        points.push(CalibrationPoint {
            temperature_k: t,
            msv_sdr: est,
        });
    }
    let fit = fit_line(&points)?;

    // Propagate the known per-point variance through the OLS weights.
    let t_mean = temps.iter().sum::<f64>() / temps.len() as f64;
    let sxx: f64 = temps.iter().map(|t| (t - t_mean) * (t - t_mean)).sum();
    let mut var_slope = 0.0;
    let mut var_intercept = 0.0;
    for (i, &t) in temps.iter().enumerate() {
        let var_y = 2.0 * truths[i] * truths[i] / n as f64;
        let dev = t - t_mean;
        var_slope += dev * dev * var_y / (sxx * sxx);
        let w = 1.0 / temps.len() as f64 - t_mean * dev / sxx;
        var_intercept += w * w * var_y;
    }
    let (se_slope, se_intercept) = (var_slope.sqrt(), var_intercept.sqrt());

    // Probe readings to invert: defaults are the three measured inputs the
    // fit is conventionally applied to.
    let mut probes = vec![
        ("lna".to_string(), sc.get_f64("calibration.probe.lna", 0.0273)?),
        ("open".to_string(), sc.get_f64("calibration.probe.open", 0.0274)?),
        ("short".to_string(), sc.get_f64("calibration.probe.short", 0.0283)?),
    ];
    probes.retain(|(_, msv)| *msv > 0.0);
    let reference = reference_fit();
    let probe_rows: Vec<ProbeRow> = probes
        .into_iter()
        .map(|(name, msv)| {
            Ok(ProbeRow {
                name,
                msv,
                noise_temp_from_fit: extract_noise_temp(msv, &fit)?,
                noise_temp_from_reference: extract_noise_temp(msv, &reference)?,
            })
        })
        .collect::<Result<_, RunnerError>>()?;

    let out = OutDir::create(out_root)?;
    let rows: Vec<Vec<String>> = points
        .iter()
        .zip(&truths)
        .map(|(p, &tr)| {
            vec![
                fmt(p.temperature_k),
                fmt(tr),
                fmt(p.msv_sdr),
                fmt(p.msv_sdr - tr),
            ]
        })
        .collect();
    out.write_csv(
        "calibration.csv",
        &["temperature_k", "msv_truth", "msv_estimated", "residual"],
        &rows,
    )?;
    let tn_rows: Vec<Vec<String>> = probe_rows
        .iter()
        .map(|p| {
            vec![
                p.name.clone(),
                fmt(p.msv),
                fmt(p.noise_temp_from_fit),
                fmt(p.noise_temp_from_reference),
            ]
        })
        .collect();
    out.write_csv(
        "tn_table.csv",
        &["probe", "msv", "noise_temp_from_fit_k", "noise_temp_from_reference_k"],
        &tn_rows,
    )?;

    let report = CalibrationReport {
        truth_mode: truth,
        samples_per_point: n,
        temperatures_k: temps,
        slope: fit.slope,
        intercept: fit.intercept,
        se_slope,
        se_intercept,
        reference_slope: REFERENCE_SLOPE,
        reference_intercept: REFERENCE_INTERCEPT,
        slope_within_3se: (fit.slope - REFERENCE_SLOPE).abs() < 3.0 * se_slope,
        intercept_within_3se: (fit.intercept - REFERENCE_INTERCEPT).abs() < 3.0 * se_intercept,
        probes: probe_rows,
        note: "Different analyses of the same hardware are known to attribute the open- and \
               short-input noise temperatures to one another; the values here come from the \
               line inversion alone."
            .to_string(),
    };
    out.write_json("results.json", &report)?;
    let n_points = report.temperatures_k.len() as u64;
    out.write_meta(&RunMeta::new(sc.name(), "calibrate", seed, n_points))?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// histogram
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct HistogramReport {
    pub load: String,
    pub sigma_sq: f64,
    pub n_samples: usize,
    pub mean_square_estimate: f64,
    pub chi2_statistic: f64,
    pub chi2_dof: usize,
    pub p_value: f64,
    pub passes_at_0_01: bool,
}

/// Synthesize one load's stream, histogram it, and overlay the zero-mean
/// Gaussian density at the chain-predicted variance, with a chi-square
/// goodness-of-fit verdict.
pub fn run_histogram(sc: &Scenario, out_root: &Path) -> Result<HistogramReport, RunnerError> {
    sc.check_keys(Scenario::COMMON_KEYS, &["chain.", "histogram."])?;
    let chain = receiver_chain(sc)?;
    let load_name = sc.get("histogram.load").unwrap_or("fifty_296").to_string();
    let sigma_sq = match sc.get("histogram.sigma_sq") {
        Some(_) => sc.require_f64("histogram.sigma_sq")?,
        None => {
            let load = LoadProfile::preset(&load_name).ok_or_else(|| {
                ScenarioError::BadValue {
                    key: "histogram.load".into(),
                    reason: format!("unknown load preset {load_name:?}"),
                }
            })?;
            chain.predicted_variance(&load)?
        }
    };
    let n = sc.get_usize("histogram.samples", 1_000_000)?;
    let bins = sc.get_usize("histogram.bins", 80)?;
    let seed = sc.seed()?;

    let mut rng = rng_for(seed, 0);
    let stream = noiselink::receiver_model::synthesize_with(sigma_sq, n, 1e6, &mut rng)?;
    let est = mean_square(&stream)?;
    let values: Vec<f64> = match &stream.samples {
        Samples::Real(v) => v.iter().map(|&x| x as f64).collect(),
        Samples::Complex(v) => v.iter().map(|c| c.re as f64).collect(),
    };

    let sigma = sigma_sq.sqrt();
    let span = 5.0 * sigma;
    let gof = chi_square_gof(&values, |x| normal_cdf(x / sigma), bins.max(2), -span, span);

    let hist = bin_values(&values, -span, span, bins);
    let rows: Vec<Vec<String>> = hist
        .iter()
        .map(|b| {
            let center = 0.5 * (b.lo + b.hi);
            let width = b.hi - b.lo;
            let density = b.count as f64 / (n as f64 * width);
            let model = noiselink::receiver_model::gaussian_pdf(center, sigma_sq)
                .expect("positive variance");
            vec![
                fmt(center),
                b.count.to_string(),
                fmt(density),
                fmt(model),
                fmt(sigma_sq),
            ]
        })
        .collect();
    let out = OutDir::create(out_root)?;
    out.write_csv(
        "histogram.csv",
        &["bin_center", "count", "density", "model_density", "sigma_sq"],
        &rows,
    )?;

    let report = HistogramReport {
        load: load_name,
        sigma_sq,
        n_samples: n,
        mean_square_estimate: est,
        chi2_statistic: gof.statistic,
        chi2_dof: gof.dof,
        p_value: gof.p_value,
        passes_at_0_01: gof.p_value > 0.01,
    };
    out.write_json("results.json", &report)?;
    out.write_meta(&RunMeta::new(sc.name(), "histogram", seed, n as u64))?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub rate_bps: f64,
    pub distance_m: f64,
    pub subcarrier_hz: f64,
    pub samples_per_bit: f64,
    pub contrast: f64,
    pub threshold: f64,
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub packets_attempted: u64,
    pub packets_decoded: u64,
    pub analytic_ber: f64,
}

#[derive(Debug, Serialize)]
pub struct SweepReport {
    pub axis: String,
    pub anchor_rate_bps: f64,
    pub anchor_distance_m: f64,
    pub anchor_target_ber: f64,
    pub anchor_contrast: f64,
    pub link_calibration_const: f64,
    pub points: Vec<SweepPoint>,
    /// Distance axis: per-rate flag that Monte-Carlo error counts never
    /// decreased with distance (common random numbers make this exact).
    pub monotone_in_distance: Vec<(f64, bool)>,
    /// Rate axis: highest tested rate with BER <= 1%, if any.
    pub max_rate_under_1pct: Option<f64>,
    /// Empirical check rows at the anchor rate (near and far), distance
    /// axis only.
    pub anchor_check: Vec<SweepPoint>,
}

/// Range/throughput sweep. The free-space path factor shapes how contrast
/// falls with distance; its absolute scale is pinned by solving for the
/// contrast that meets the configured anchor (rate, distance, BER) under the
/// closed-form error model, after which every other grid point is a
/// prediction.
pub fn run_sweep(sc: &Scenario, axis: &str, out_root: &Path) -> Result<SweepReport, RunnerError> {
    sc.check_keys(Scenario::COMMON_KEYS, &["modem.", "link.", "sweep."])?;
    match axis {
        "distance" | "rate" => {}
        other => {
            return Err(ScenarioError::BadValue {
                key: "sweep.axis".into(),
                reason: format!("expected distance or rate, got {other:?}"),
            }
            .into())
        }
    }
    let base_cfg = modem_config(sc)?;
    let link = link_budget(sc)?;
    let off_sigma = sc.require_f64("sweep.off_sigma_sq")?;
    let tx_contrast = sc.get_f64("sweep.tx_contrast", 1.0)?;
    let rates = sc.require_f64_list("sweep.rates_bps")?;
    let packets = sc.trials()?;
    let seed = sc.seed()?;

    let require_anchor = |key: &str| -> Result<f64, RunnerError> {
        match sc.require_f64(key) {
            Err(ScenarioError::MissingKey(k)) => Err(RunnerError::Anchor(format!(
                "{k} not set; the absolute link scale must come from a measured operating point"
            ))),
            other => Ok(other?),
        }
    };
    let anchor_rate = require_anchor("sweep.anchor.rate_bps")?;
    let anchor_distance = require_anchor("sweep.anchor.distance_m")?;
    let anchor_ber = require_anchor("sweep.anchor.ber")?;
    if !(anchor_ber > 0.0 && anchor_ber < 0.5) {
        return Err(RunnerError::Anchor(format!(
            "anchor BER must be in (0, 0.5), got {anchor_ber}"
        )));
    }

    let cfg_for_rate = |rate: f64| -> Result<ModemConfig, RunnerError> {
        let mut cfg = base_cfg.clone();
        cfg.subcarrier_hz = rate * cfg.cycles_per_bit as f64;
        cfg.validate()?;
        Ok(cfg)
    };

    // Solve the anchor: which received contrast makes the closed-form BER hit
    // the target at the anchor rate's integration length?
    let anchor_spb = cfg_for_rate(anchor_rate)?.samples_per_bit();
    let ber_of = |c: f64| analytic_ber(off_sigma + c, off_sigma, anchor_spb, None).unwrap();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while ber_of(hi) > anchor_ber {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(RunnerError::Anchor(
                "anchor BER unreachable at any contrast".into(),
            ));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ber_of(mid) > anchor_ber {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let anchor_contrast = 0.5 * (lo + hi);
    let calibration_const =
        anchor_contrast / (path_factor(&link, anchor_distance)? * tx_contrast);

    let distances: Vec<f64> = match axis {
        "distance" => sc.require_f64_list("sweep.distances_m")?,
        _ => vec![sc.get_f64("sweep.fixed_distance_m", anchor_distance)?],
    };

    let run_point = |rate: f64, distance: f64| -> Result<SweepPoint, RunnerError> {
        let cfg = cfg_for_rate(rate)?;
        let spb = cfg.samples_per_bit();
        let contrast = calibration_const * path_factor(&link, distance)? * tx_contrast;
        let threshold = spb * contrast / 4.0;
        let sigma_on = off_sigma + contrast;

        let outcomes = trials::run(packets, |t| -> Result<(u64, bool), RunnerError> {
            let mut rng = rng_for(seed, t);
            let payload = random_bits(&mut rng, cfg.payload_bits);
            let packet = frame(&payload, &cfg)?;
            let schedule = modulate(&packet, &cfg)?;
            let stream = render_waveform_with(&schedule, sigma_on, off_sigma, &mut rng)?;
            let soft = bit_intensities(&stream, &cfg, 0)?;
            let decided: Vec<bool> = soft[..cfg.packet_bits()]
                .iter()
                .map(|&x| x > threshold)
                .collect();
            let errors = count_errors(&decided[cfg.preamble.len()..], &payload);
            let deframed = deframe(&decided, &cfg).is_ok();
            Ok((errors, deframed))
        });
        let mut errors = 0u64;
        let mut decoded = 0u64;
        for o in outcomes {
            let (e, d) = o?;
            errors += e;
            decoded += d as u64;
        }
        let bits = packets * cfg.payload_bits as u64;
        let ci = wilson_interval(errors, bits, WILSON_Z);
        Ok(SweepPoint {
            rate_bps: rate,
            distance_m: distance,
            subcarrier_hz: cfg.subcarrier_hz,
            samples_per_bit: spb,
            contrast,
            threshold,
            bits,
            errors,
            ber: errors as f64 / bits as f64,
            wilson_lo: ci.lo,
            wilson_hi: ci.hi,
            packets_attempted: packets,
            packets_decoded: decoded,
            analytic_ber: analytic_ber(sigma_on, off_sigma, spb, None)?,
        })
    };

    let mut points = Vec::new();
    for &rate in &rates {
        for &d in &distances {
            points.push(run_point(rate, d)?);
        }
    }

    let mut monotone = Vec::new();
    if axis == "distance" {
        for &rate in &rates {
            let curve: Vec<&SweepPoint> = points
                .iter()
                .filter(|p| p.rate_bps == rate)
                .collect();
            let ok = curve.windows(2).all(|w| w[0].errors <= w[1].errors);
            monotone.push((rate, ok));
        }
    }

    let max_rate_under_1pct = if axis == "rate" {
        points
            .iter()
            .filter(|p| p.ber <= 0.01)
            .map(|p| p.rate_bps)
            .fold(None, |acc: Option<f64>, r| {
                Some(acc.map_or(r, |a| a.max(r)))
            })
    } else {
        None
    };

    let anchor_check = if axis == "distance" {
        vec![
            run_point(anchor_rate, anchor_distance)?,
            run_point(anchor_rate, 3.0 * anchor_distance)?,
        ]
    } else {
        Vec::new()
    };

    let out = OutDir::create(out_root)?;
    let header = [
        "rate_bps",
        "distance_m",
        "subcarrier_hz",
        "samples_per_bit",
        "contrast",
        "threshold",
        "bits",
        "errors",
        "ber",
        "wilson_lo",
        "wilson_hi",
        "packets_attempted",
        "packets_decoded",
        "analytic_ber",
    ];
    let point_row = |p: &SweepPoint| -> Vec<String> {
        vec![
            fmt(p.rate_bps),
            fmt(p.distance_m),
            fmt(p.subcarrier_hz),
            fmt(p.samples_per_bit),
            fmt(p.contrast),
            fmt(p.threshold),
            p.bits.to_string(),
            p.errors.to_string(),
            fmt(p.ber),
            fmt(p.wilson_lo),
            fmt(p.wilson_hi),
            p.packets_attempted.to_string(),
            p.packets_decoded.to_string(),
            fmt(p.analytic_ber),
        ]
    };
    out.write_csv("sweep.csv", &header, &points.iter().map(point_row).collect::<Vec<_>>())?;
    if !anchor_check.is_empty() {
        out.write_csv(
            "anchor_check.csv",
            &header,
            &anchor_check.iter().map(point_row).collect::<Vec<_>>(),
        )?;
    }

    let report = SweepReport {
        axis: axis.to_string(),
        anchor_rate_bps: anchor_rate,
        anchor_distance_m: anchor_distance,
        anchor_target_ber: anchor_ber,
        anchor_contrast,
        link_calibration_const: calibration_const,
        points,
        monotone_in_distance: monotone,
        max_rate_under_1pct,
        anchor_check,
    };
    out.write_json("results.json", &report)?;
    out.write_meta(&RunMeta::new(sc.name(), "sweep", seed, packets))?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// demod-iq
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct DemodIqReport {
    pub n_samples: usize,
    pub n_bits: usize,
    pub hampel_replaced: usize,
    pub packet_found: bool,
    pub bit_offset: Option<usize>,
    pub correlation: f64,
    pub threshold: f64,
    pub payload_hex: Option<String>,
}

pub struct DemodIqArgs {
    pub input: std::path::PathBuf,
    pub format: Option<String>,
    pub rate: Option<f64>,
    pub scale: Option<f64>,
    pub hampel: bool,
    pub sync_offset: usize,
}

/// Demodulate a recorded capture: load samples (sidecar header or explicit
/// flags), optionally despike the real component, integrate bit
/// intensities, and hunt for a packet. Finding no packet is a result, not
/// a failure.
pub fn run_demod_iq(
    sc: &Scenario,
    args: &DemodIqArgs,
    out_root: &Path,
) -> Result<DemodIqReport, RunnerError> {
    sc.check_keys(Scenario::COMMON_KEYS, &["modem.", "hampel."])?;
    let cfg = modem_config(sc)?;
    cfg.validate()?;

    let mut header = match &args.format {
        Some(f) => {
            let rate = args.rate.ok_or_else(|| ScenarioError::BadValue {
                key: "rate".into(),
                reason: "--rate is required when --format is given".into(),
            })?;
            IqFileHeader::new(f.parse()?, rate)
        }
        None => IqFileHeader::from_sidecar(&args.input)?,
    };
    if let Some(scale) = args.scale {
        header.scale = scale;
    }
    let stream = read_iq(&args.input, &header)?;

    let (stream, replaced) = if args.hampel {
        let k = sc.get_usize("hampel.half_window", HampelConfig::default().half_window)?;
        let n_sigma = sc.get_f64("hampel.n_sigma", HampelConfig::default().n_sigma)?;
        let hampel = HampelConfig {
            half_window: k,
            n_sigma,
        };
        // Despike each sample component independently; a complex stream keeps
        // its quadrature structure.
        let (samples, replaced) = match &stream.samples {
            Samples::Real(v) => {
                let xs: Vec<f64> = v.iter().map(|&x| x as f64).collect();
                let r = hampel_filter(&xs, &hampel)?;
                (
                    Samples::Real(r.cleaned.iter().map(|&x| x as f32).collect()),
                    r.replaced.len(),
                )
            }
            Samples::Complex(v) => {
                let re: Vec<f64> = v.iter().map(|c| c.re as f64).collect();
                let im: Vec<f64> = v.iter().map(|c| c.im as f64).collect();
                let rr = hampel_filter(&re, &hampel)?;
                let ri = hampel_filter(&im, &hampel)?;
                let cleaned: Vec<Complex32> = rr
                    .cleaned
                    .iter()
                    .zip(&ri.cleaned)
                    .map(|(&a, &b)| Complex32::new(a as f32, b as f32))
                    .collect();
                (Samples::Complex(cleaned), rr.replaced.len() + ri.replaced.len())
            }
        };
        let cleaned = SampleStream {
            samples,
            sample_rate_hz: stream.sample_rate_hz,
            seed: None,
        };
        (cleaned, replaced)
    } else {
        (stream, 0)
    };

    let soft = bit_intensities(&stream, &cfg, args.sync_offset)?;
    let alignment = match detect_packet(&soft, &cfg) {
        Ok(a) => Some(a),
        Err(ModemError::NoPacket { best_correlation }) => {
            crate::output::note(&format!(
                "no packet: best preamble correlation {best_correlation:.3}"
            ));
            None
        }
        Err(ModemError::StreamTooShort { .. }) => None,
        Err(e) => return Err(e.into()),
    };

    let threshold = alignment.map(|a| a.threshold).unwrap_or(0.0);
    let rows: Vec<Vec<String>> = soft
        .iter()
        .enumerate()
        .map(|(i, &x)| vec![i.to_string(), fmt(x), ((x > threshold) as u8).to_string()])
        .collect();
    let out = OutDir::create(out_root)?;
    out.write_csv("intensities.csv", &["bit_index", "intensity", "decision"], &rows)?;

    let payload_hex = alignment.and_then(|a| {
        let window = &soft[a.bit_offset..a.bit_offset + cfg.packet_bits()];
        let decided: Vec<bool> = window.iter().map(|&x| x > a.threshold).collect();
        deframe(&decided, &cfg).ok().map(|p| bits_to_hex(&p))
    });

    let report = DemodIqReport {
        n_samples: stream.len(),
        n_bits: soft.len(),
        hampel_replaced: replaced,
        packet_found: alignment.is_some(),
        bit_offset: alignment.map(|a| a.bit_offset),
        correlation: alignment.map(|a| a.correlation).unwrap_or(0.0),
        threshold,
        payload_hex,
    };
    out.write_json("results.json", &report)?;
    out.write_meta(&RunMeta::new(sc.name(), "demod-iq", sc.seed()?, 1))?;
    Ok(report)
}
