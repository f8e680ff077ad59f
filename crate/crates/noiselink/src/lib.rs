//! Simulation and analysis toolkit for data links that signal by switching a
//! thermal noise source on and off.
//!
//! The transmitter here is nothing but a resistor and an RF switch: flipping
//! the switch changes the noise temperature seen by a receiver, and that
//! variance contrast — not any deterministic waveform — carries the bits.
//! The crate models the whole chain:
//!
//! * [`noise_physics`] — Johnson noise of a resistive source, voltage
//!   dividers, available power;
//! * [`receiver_model`] — mapping physical mean-square voltage into SDR
//!   variance units, and deterministic Gaussian stream synthesis;
//! * [`calibration`] — the variance-vs-temperature line, noise-temperature
//!   extraction, and receiver gain estimation;
//! * [`modem`] — on-off keying on a square subcarrier, Barker-framed
//!   packets, radiometric (switched power) demodulation, and a closed-form
//!   error-rate reference;
//! * [`channel`] — free-space link budget connecting transmit contrast to
//!   received contrast versus distance;
//! * [`iq_ingest`] — capture file formats and Hampel despiking;
//! * [`stats`] — the small statistical toolbox used throughout;
//! * [`trials`] — parallel Monte-Carlo execution (rayon behind the
//!   `parallel` feature, sequential otherwise).
//!
//! Everything downstream of a seed is deterministic: streams are generated
//! by ChaCha12 keyed by `(seed, stream)`, so any figure produced by this
//! crate can be regenerated bit-for-bit.

pub mod calibration;
pub mod channel;
pub mod iq_ingest;
pub mod modem;
pub mod noise_physics;
pub mod receiver_model;
pub mod stats;
pub mod trials;

pub use calibration::{CalibrationPoint, LinearFit};
pub use channel::LinkBudget;
pub use modem::{DemodResult, ModemConfig, SwitchSchedule, ThresholdPolicy, BARKER7};
pub use noise_physics::{LoadProfile, BOLTZMANN};
pub use receiver_model::{ReceiverChain, SampleStream, Samples};
