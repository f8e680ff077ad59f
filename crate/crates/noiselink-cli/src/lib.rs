//! Scenario-driven experiment runner around the `noiselink` toolkit.
//!
//! The binary front-end lives in `main.rs`; everything it does is reachable
//! through this library so integration tests can drive runs in-process and
//! assert on typed reports instead of scraping output files.

pub mod output;
pub mod runners;
pub mod scenario;
