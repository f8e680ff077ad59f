//! Reading and writing captured sample files, plus outlier cleanup.
//!
//! Three on-disk layouts are supported:
//!
//! * `cf32` — interleaved little-endian `f32` I/Q pairs (the canonical
//!   format; round-trips bit-identically at scale 1.0),
//! * `i16`  — interleaved little-endian signed 16-bit I/Q pairs, scaled by
//!   `1/32768` on read so `i16::MIN` maps to magnitude exactly 1.0,
//! * `csv`  — one value per line (real) or two comma-separated per line
//!   (complex), human-auditable.
//!
//! A capture may carry a JSON sidecar (`<file>.json`) describing format,
//! sample rate, scale, and center frequency; `IqFileHeader::from_sidecar`
//! reads it.
//!
//! Real captures contain sporadic interference spikes that would dominate a
//! mean-square estimate, so `hampel_filter` replaces samples more than
//! `n_sigma` robust deviations from their local median with that median
//! (deviation scale = 1.4826 * MAD, the Gaussian-consistent factor).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex32;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::receiver_model::{SampleStream, Samples};

#[derive(Debug, Error)]
pub enum IqError {
    #[error("unknown sample format {0:?} (expected cf32, i16, or csv)")]
    UnknownFormat(String),
    #[error("file truncated mid-sample at byte {offset}")]
    Truncated { offset: u64 },
    #[error("no samples in stream")]
    EmptyStream,
    #[error("bad csv record on line {line}: {reason}")]
    BadCsv { line: usize, reason: String },
    #[error("stream of {len} samples too short for half-window {half_window}")]
    TooShort { len: usize, half_window: usize },
    #[error("bad sidecar header: {0}")]
    BadHeader(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// On-disk sample layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IqFormat {
    Cf32,
    I16,
    Csv,
}

impl FromStr for IqFormat {
    type Err = IqError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cf32" => Ok(IqFormat::Cf32),
            "i16" => Ok(IqFormat::I16),
            "csv" => Ok(IqFormat::Csv),
            other => Err(IqError::UnknownFormat(other.to_string())),
        }
    }
}

impl std::fmt::Display for IqFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            IqFormat::Cf32 => "cf32",
            IqFormat::I16 => "i16",
            IqFormat::Csv => "csv",
        };
        f.write_str(s)
    }
}

/// Capture metadata carried in a JSON sidecar next to the sample file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqFileHeader {
    pub format: IqFormat,
    pub sample_rate_hz: f64,
    /// Multiplier applied to every value on read (after any intrinsic
    /// format scaling).
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default)]
    pub center_freq_hz: Option<f64>,
}

fn default_scale() -> f64 {
    1.0
}

impl IqFileHeader {
    pub fn new(format: IqFormat, sample_rate_hz: f64) -> Self {
        IqFileHeader {
            format,
            sample_rate_hz,
            scale: 1.0,
            center_freq_hz: None,
        }
    }

    /// Conventional sidecar path for a sample file: `<file>.json`.
    pub fn sidecar_path(data_path: &Path) -> std::path::PathBuf {
        let mut s = data_path.as_os_str().to_os_string();
        s.push(".json");
        std::path::PathBuf::from(s)
    }

    pub fn from_sidecar(data_path: &Path) -> Result<Self, IqError> {
        let path = Self::sidecar_path(data_path);
        let text = std::fs::read_to_string(&path)?;
        serde_json::from_str(&text).map_err(|e| IqError::BadHeader(e.to_string()))
    }

    pub fn write_sidecar(&self, data_path: &Path) -> Result<(), IqError> {
        let path = Self::sidecar_path(data_path);
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| IqError::BadHeader(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

const I16_SCALE: f32 = 1.0 / 32768.0;

/// Read a sample file into a complex stream according to the header.
pub fn read_iq(path: &Path, header: &IqFileHeader) -> Result<SampleStream, IqError> {
    let samples = match header.format {
        IqFormat::Cf32 => read_cf32(path)?,
        IqFormat::I16 => read_i16(path)?,
        IqFormat::Csv => read_csv(path)?,
    };
    let mut samples = samples;
    if header.scale != 1.0 {
        let k = header.scale as f32;
        match &mut samples {
            Samples::Real(v) => v.iter_mut().for_each(|x| *x *= k),
            Samples::Complex(v) => v.iter_mut().for_each(|x| *x *= k),
        }
    }
    if samples.is_empty() {
        return Err(IqError::EmptyStream);
    }
    Ok(SampleStream {
        samples,
        sample_rate_hz: header.sample_rate_hz,
        seed: None,
    })
}

/// Write a stream in the given format. Real streams are written with a zero
/// quadrature in the binary formats and one column in csv.
pub fn write_iq(path: &Path, stream: &SampleStream, format: IqFormat) -> Result<(), IqError> {
    if stream.is_empty() {
        return Err(IqError::EmptyStream);
    }
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    match format {
        IqFormat::Cf32 => match &stream.samples {
            Samples::Real(v) => {
                for &x in v {
                    w.write_f32::<LittleEndian>(x)?;
                    w.write_f32::<LittleEndian>(0.0)?;
                }
            }
            Samples::Complex(v) => {
                for c in v {
                    w.write_f32::<LittleEndian>(c.re)?;
                    w.write_f32::<LittleEndian>(c.im)?;
                }
            }
        },
        IqFormat::I16 => {
            let quantize = |x: f32| -> i16 {
                let scaled = (x / I16_SCALE).round();
                scaled.clamp(i16::MIN as f32, i16::MAX as f32) as i16
            };
            match &stream.samples {
                Samples::Real(v) => {
                    for &x in v {
                        w.write_i16::<LittleEndian>(quantize(x))?;
                        w.write_i16::<LittleEndian>(0)?;
                    }
                }
                Samples::Complex(v) => {
                    for c in v {
                        w.write_i16::<LittleEndian>(quantize(c.re))?;
                        w.write_i16::<LittleEndian>(quantize(c.im))?;
                    }
                }
            }
        }
        IqFormat::Csv => match &stream.samples {
            Samples::Real(v) => {
                for &x in v {
                    writeln!(w, "{x}")?;
                }
            }
            Samples::Complex(v) => {
                for c in v {
                    writeln!(w, "{},{}", c.re, c.im)?;
                }
            }
        },
    }
    w.flush()?;
    Ok(())
}

fn read_cf32(path: &Path) -> Result<Samples, IqError> {
    let meta = std::fs::metadata(path)?;
    let len = meta.len();
    if len % 8 != 0 {
        return Err(IqError::Truncated {
            offset: len - len % 8,
        });
    }
    let mut r = BufReader::new(File::open(path)?);
    let n = (len / 8) as usize;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let re = r.read_f32::<LittleEndian>()?;
        let im = r.read_f32::<LittleEndian>()?;
        out.push(Complex32::new(re, im));
    }
    Ok(Samples::Complex(out))
}

fn read_i16(path: &Path) -> Result<Samples, IqError> {
    let meta = std::fs::metadata(path)?;
    let len = meta.len();
    if len % 4 != 0 {
        return Err(IqError::Truncated {
            offset: len - len % 4,
        });
    }
    let mut r = BufReader::new(File::open(path)?);
    let n = (len / 4) as usize;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let re = r.read_i16::<LittleEndian>()? as f32 * I16_SCALE;
        let im = r.read_i16::<LittleEndian>()? as f32 * I16_SCALE;
        out.push(Complex32::new(re, im));
    }
    Ok(Samples::Complex(out))
}

fn read_csv(path: &Path) -> Result<Samples, IqError> {
    let r = BufReader::new(File::open(path)?);
    let mut real = Vec::new();
    let mut complex = Vec::new();
    let mut columns: Option<usize> = None;
    for (idx, line) in r.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let ncols = fields.len();
        if ncols > 2 {
            return Err(IqError::BadCsv {
                line: line_no,
                reason: format!("expected 1 or 2 columns, got {ncols}"),
            });
        }
        match columns {
            None => columns = Some(ncols),
            Some(c) if c != ncols => {
                return Err(IqError::BadCsv {
                    line: line_no,
                    reason: format!("column count changed from {c} to {ncols}"),
                });
            }
            _ => {}
        }
        let parse = |s: &str| -> Result<f32, IqError> {
            s.parse::<f32>().map_err(|e| IqError::BadCsv {
                line: line_no,
                reason: format!("{e}: {s:?}"),
            })
        };
        if ncols == 1 {
            real.push(parse(fields[0])?);
        } else {
            complex.push(Complex32::new(parse(fields[0])?, parse(fields[1])?));
        }
    }
    match columns {
        Some(1) => Ok(Samples::Real(real)),
        Some(2) => Ok(Samples::Complex(complex)),
        _ => Err(IqError::EmptyStream),
    }
}

// ----------------------------------------------------------------------------

/// Gaussian-consistency factor: for normal data, 1.4826 * MAD estimates the
/// standard deviation.
pub const MAD_SCALE: f64 = 1.4826;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HampelConfig {
    /// Samples on each side of the center in the sliding window.
    pub half_window: usize,
    /// Rejection distance in robust standard deviations.
    pub n_sigma: f64,
}

impl Default for HampelConfig {
    fn default() -> Self {
        HampelConfig {
            half_window: 100,
            n_sigma: 3.0,
        }
    }
}

/// Outcome of a despiking pass: the cleaned values and which indices were
/// replaced.
#[derive(Debug, Clone, PartialEq)]
pub struct HampelResult {
    pub cleaned: Vec<f64>,
    pub replaced: Vec<usize>,
}

fn median_in_place(buf: &mut Vec<f64>) -> f64 {
    buf.sort_by(|a, b| a.partial_cmp(b).expect("median of NaN-free data"));
    let n = buf.len();
    if n % 2 == 1 {
        buf[n / 2]
    } else {
        0.5 * (buf[n / 2 - 1] + buf[n / 2])
    }
}

/// Sliding-window median despiker. A sample further than
/// `n_sigma * 1.4826 * MAD` from the median of its window (clipped at the
/// edges, center included) is replaced by that median. A window with zero
/// MAD — at least half its samples identical — flags any deviation at all.
pub fn hampel_filter(data: &[f64], cfg: &HampelConfig) -> Result<HampelResult, IqError> {
    let k = cfg.half_window;
    if data.len() <= 2 * k {
        return Err(IqError::TooShort {
            len: data.len(),
            half_window: k,
        });
    }
    let mut cleaned = Vec::with_capacity(data.len());
    let mut replaced = Vec::new();
    let mut window = Vec::with_capacity(2 * k + 1);
    let mut devs = Vec::with_capacity(2 * k + 1);
    for i in 0..data.len() {
        let lo = i.saturating_sub(k);
        let hi = (i + k + 1).min(data.len());
        window.clear();
        window.extend_from_slice(&data[lo..hi]);
        let med = median_in_place(&mut window);
        devs.clear();
        devs.extend(data[lo..hi].iter().map(|x| (x - med).abs()));
        let mad = median_in_place(&mut devs);
        let dev = (data[i] - med).abs();
        let outlier = if mad > 0.0 {
            dev > cfg.n_sigma * MAD_SCALE * mad
        } else {
            dev > 0.0
        };
        if outlier {
            cleaned.push(med);
            replaced.push(i);
        } else {
            cleaned.push(data[i]);
        }
    }
    Ok(HampelResult { cleaned, replaced })
}

// ----------------------------------------------------------------------------
