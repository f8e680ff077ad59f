//! `noiselink` — scenario runner for the thermal-noise communication
//! simulator.
//!
//! Every subcommand resolves a scenario (explicit `--scenario` file or the
//! embedded preset), applies CLI overrides, runs one experiment, and writes
//! CSV/JSON results plus `run_meta.json` into the output directory.
//!
//! Exit codes: 0 success, 2 configuration error, 3 parse error, 4 domain
//! error, 5 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use noiselink_cli::runners::{self, DemodIqArgs, RunnerError};
use noiselink_cli::scenario::{self, Scenario};

#[derive(Parser)]
#[command(
    name = "noiselink",
    version,
    about = "Simulate and decode data links that modulate Johnson noise",
    after_help = "Scenario files are flat `key = value` text; run a subcommand without \
                  --scenario to use its embedded preset, which documents every key."
)]
struct Cli {
    /// Scenario file; defaults to the subcommand's embedded preset
    #[arg(long, global = true, value_name = "FILE")]
    scenario: Option<PathBuf>,

    /// Override the scenario seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (default: out/<subcommand>)
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Override the scenario trial count
    #[arg(long, global = true)]
    trials: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Switch-feedthrough control runs (zero- and full-contrast variants)
    Feedthrough {
        /// Variant: open_open, fifty_fifty, or open_fifty
        #[arg(long)]
        variant: Option<String>,
    },
    /// Hot/cold temperature-modulated packets through the full receive path
    Tempmod {
        /// Render ON bits at the cold variance; payloads decode complemented
        #[arg(long)]
        swap: bool,
    },
    /// Fit the variance-vs-temperature line and extract noise temperatures
    Calibrate {
        /// Truth model for synthesized points: fit_line or chain
        #[arg(long)]
        truth: Option<String>,
    },
    /// Amplitude histogram of a synthesized stream with Gaussian overlay
    Histogram {
        /// Termination preset (fifty_296, fifty_77, open_296, short_296, ...)
        #[arg(long)]
        load: Option<String>,
    },
    /// BER sweep over distance or rate, anchored to a measured operating point
    Sweep {
        /// Sweep axis: distance or rate
        #[arg(long)]
        axis: Option<String>,
    },
    /// Demodulate a recorded IQ capture file
    #[command(name = "demod-iq")]
    DemodIq {
        /// Capture file (cf32, i16, or csv)
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Sample format when no sidecar header exists
        #[arg(long)]
        format: Option<String>,
        /// Sample rate in Hz when no sidecar header exists
        #[arg(long)]
        rate: Option<f64>,
        /// Extra amplitude scale applied on read
        #[arg(long)]
        scale: Option<f64>,
        /// Despike with a Hampel filter before bit integration
        #[arg(long)]
        hampel: bool,
        /// Drop this many leading samples before bit integration
        #[arg(long, default_value_t = 0)]
        sync_offset: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Feedthrough { .. } => "feedthrough",
            Command::Tempmod { .. } => "tempmod",
            Command::Calibrate { .. } => "calibrate",
            Command::Histogram { .. } => "histogram",
            Command::Sweep { .. } => "sweep",
            Command::DemodIq { .. } => "demod-iq",
        }
    }

    fn preset(&self) -> Option<&'static str> {
        match self {
            Command::Feedthrough { .. } => Some("feedthrough"),
            Command::Tempmod { .. } => Some("tempmod"),
            Command::Calibrate { .. } => Some("calibration"),
            Command::Histogram { .. } => Some("histogram"),
            Command::Sweep { .. } => Some("sweep"),
            // A capture decode has no experiment preset; modem settings come
            // from --scenario or the library defaults.
            Command::DemodIq { .. } => None,
        }
    }
}

fn run(cli: &Cli) -> Result<(), RunnerError> {
    let mut sc = match &cli.scenario {
        Some(path) => Scenario::load(path)?,
        None => match cli.command.preset() {
            Some(name) => Scenario::parse(scenario::preset(name)?)?,
            None => Scenario::parse("")?,
        },
    };
    if let Some(seed) = cli.seed {
        sc.set("seed", seed.to_string());
    }
    if let Some(trials) = cli.trials {
        sc.set("trials", trials.to_string());
    }
    if let Some(out) = &cli.out {
        sc.set("out", out.display().to_string());
    }
    let out_dir = sc
        .get("out")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out").join(cli.command.name()));

    match &cli.command {
        Command::Feedthrough { variant } => {
            let variant = variant
                .clone()
                .or_else(|| sc.get("feedthrough.variant").map(str::to_string))
                .unwrap_or_else(|| "open_fifty".to_string());
            let r = runners::run_feedthrough(&sc, &variant, &out_dir)?;
            println!(
                "feedthrough {}: BER {:.5} over {} bits, KS p = {:.4} ({})",
                r.variant,
                r.bit_error_rate,
                r.n_bits,
                r.ks_p_value,
                if r.separable { "populations differ" } else { "no detectable leakage" },
            );
        }
        Command::Tempmod { swap } => {
            if *swap {
                sc.set("tempmod.swap", "true".to_string());
            }
            let r = runners::run_tempmod(&sc, &out_dir)?;
            println!(
                "tempmod{}: {}/{} packets decoded, payload BER {:.5} (95% CI {:.5}..{:.5})",
                if r.swap { " (swapped)" } else { "" },
                r.packets_decoded,
                r.packets_attempted,
                r.ber,
                r.wilson_lo,
                r.wilson_hi,
            );
            if r.swap {
                println!(
                    "  vs complemented payloads: BER {:.5}",
                    r.ber_vs_complement
                );
            }
        }
        Command::Calibrate { truth } => {
            if let Some(t) = truth {
                sc.set("calibration.truth", t.clone());
            }
            let r = runners::run_calibration(&sc, &out_dir)?;
            println!(
                "calibrate ({}): slope {:.6e} +- {:.1e}, intercept {:.6} +- {:.1e}",
                r.truth_mode, r.slope, r.se_slope, r.intercept, r.se_intercept,
            );
            for p in &r.probes {
                println!(
                    "  {}: msv {} -> noise temperature {:.2} K",
                    p.name, p.msv, p.noise_temp_from_fit
                );
            }
        }
        Command::Histogram { load } => {
            if let Some(l) = load {
                sc.set("histogram.load", l.clone());
            }
            let r = runners::run_histogram(&sc, &out_dir)?;
            println!(
                "histogram {}: sigma^2 {:.6}, chi2 {:.1} on {} dof, p = {:.4}",
                r.load, r.sigma_sq, r.chi2_statistic, r.chi2_dof, r.p_value,
            );
        }
        Command::Sweep { axis } => {
            let axis = axis
                .clone()
                .or_else(|| sc.get("sweep.axis").map(str::to_string))
                .unwrap_or_else(|| "distance".to_string());
            let r = runners::run_sweep(&sc, &axis, &out_dir)?;
            println!(
                "sweep ({} axis): {} points, anchor contrast {:.4} at {} bps / {} m",
                r.axis,
                r.points.len(),
                r.anchor_contrast,
                r.anchor_rate_bps,
                r.anchor_distance_m,
            );
            if let Some(rate) = r.max_rate_under_1pct {
                println!("  highest rate with BER <= 1%: {rate} bps");
            }
        }
        Command::DemodIq {
            input,
            format,
            rate,
            scale,
            hampel,
            sync_offset,
        } => {
            let args = DemodIqArgs {
                input: input.clone(),
                format: format.clone(),
                rate: *rate,
                scale: *scale,
                hampel: *hampel,
                sync_offset: *sync_offset,
            };
            let r = runners::run_demod_iq(&sc, &args, &out_dir)?;
            match &r.payload_hex {
                Some(hex) => println!(
                    "demod-iq: packet at bit {} (correlation {:.3}), payload 0x{}",
                    r.bit_offset.unwrap_or(0),
                    r.correlation,
                    hex,
                ),
                None => println!(
                    "demod-iq: no packet in {} bits (best correlation {:.3})",
                    r.n_bits, r.correlation,
                ),
            }
        }
    }
    println!("results in {}", out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
