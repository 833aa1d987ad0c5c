//! Command-line front end for the comb-squeezing toolkit.
//!
//! Exit codes: 0 success, 1 a verification suite found a discrepancy,
//! 2 bad arguments, bad input files, or I/O trouble.

mod commands;
mod config;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "cvcomb",
    version,
    about = "Design toolkit for two-mode-squeezed comb pairs in Kerr microresonators",
    propagate_version = true
)]
struct Cli {
    /// TOML file with saved defaults; explicit flags always win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form squeezing level for every comb pair of a device.
    Spectrum(SpectrumArgs),
    /// Check the closed form against the frequency-domain and stochastic
    /// solvers, plus the physicality invariants.
    Verify(VerifyArgs),
    /// Pump power and transmission for target operating points.
    Calibrate(CalibrateArgs),
    /// Count and maximize the pairs inside the uniform-squeezing regime.
    Plan(PlanArgs),
    /// Fit a measured dispersion scan and recover crossing parameters.
    Fit(FitArgs),
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    /// Device description TOML (alternative: --d2-hz with --kappa-hz).
    #[arg(long, value_name = "FILE")]
    device: Option<PathBuf>,
    /// Background curvature D2/2pi in Hz for an inline device.
    #[arg(long, value_name = "HZ")]
    d2_hz: Option<f64>,
    /// Third-order term D3/2pi in Hz for an inline device.
    #[arg(long, value_name = "HZ")]
    d3_hz: Option<f64>,
    /// Loaded linewidth kappa/2pi in Hz for an inline device.
    #[arg(long, value_name = "HZ")]
    kappa_hz: Option<f64>,
    /// Pump parameter; 0 <= alpha < 1.
    #[arg(long)]
    alpha: Option<f64>,
    /// Normalized pump detuning at mode 0.
    #[arg(long)]
    zeta0: Option<f64>,
    /// Override the device's default extraction efficiency.
    #[arg(long)]
    eta_e: Option<f64>,
    /// Detection efficiency.
    #[arg(long)]
    eta_d: Option<f64>,
    #[arg(long)]
    k_min: Option<i32>,
    #[arg(long)]
    k_max: Option<i32>,
    /// Flag pairs whose loss perturbation exceeds this (units of kappa/2).
    #[arg(long)]
    dkappa_warn: Option<f64>,
    /// Write the table here instead of stdout.
    #[arg(short, long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also draw the squeezing spectrum.
    #[arg(long, value_name = "FILE")]
    svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Relative tolerance for the closed-form comparison.
    #[arg(long)]
    tol: Option<f64>,
    /// Run the thinned grid (a few hundred points).
    #[arg(long)]
    quick: bool,
    /// Also run the trajectory-integrator cross-check (slower).
    #[arg(long)]
    stochastic: bool,
    /// Root seed for the stochastic suite.
    #[arg(long)]
    seed: Option<u64>,
    /// Swap the detuning optimum sign inside the checked formula; the run
    /// must then fail, which demonstrates the harness has teeth.
    #[arg(long, hide = true)]
    corrupt_formula: bool,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    /// Pump parameter; 0 <= alpha < 1.
    #[arg(long)]
    alpha: Option<f64>,
    /// Operating detunings, comma separated.
    #[arg(long, value_delimiter = ',')]
    zeta0: Option<Vec<f64>>,
    /// Extraction efficiency at the pump mode.
    #[arg(long)]
    eta_e: Option<f64>,
    /// Threshold power in microwatts; enables the absolute power column.
    #[arg(long, value_name = "UW")]
    pth_uw: Option<f64>,
    /// Write the table here instead of stdout.
    #[arg(short, long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlanArgs {
    /// Pump parameter; 0 <= alpha < 1.
    #[arg(long)]
    alpha: Option<f64>,
    /// Dispersion step D2/(kappa/2) directly.
    #[arg(long)]
    d2_norm: Option<f64>,
    /// D2/2pi in Hz; combine with --kappa-hz, or with --wavelength-nm and
    /// --q-loaded.
    #[arg(long, value_name = "HZ")]
    d2_hz: Option<f64>,
    /// Loaded linewidth kappa/2pi in Hz.
    #[arg(long, value_name = "HZ")]
    kappa_hz: Option<f64>,
    /// Pump wavelength in nm (with --q-loaded).
    #[arg(long, value_name = "NM")]
    wavelength_nm: Option<f64>,
    /// Loaded quality factor (with --wavelength-nm).
    #[arg(long)]
    q_loaded: Option<f64>,
    /// Largest pump detuning the experiment can hold.
    #[arg(long)]
    zeta0_max: Option<f64>,
    /// Largest pair index available.
    #[arg(long)]
    k_max: Option<i32>,
    /// Write the JSON plan here instead of stdout.
    #[arg(short, long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also write the pair count along the detuning sweep.
    #[arg(long, value_name = "FILE")]
    sweep_out: Option<PathBuf>,
    /// Also draw the sweep.
    #[arg(long, value_name = "FILE")]
    svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Scan file: `k,dint_hz` CSV with optional `# kappa_hz = ...` metadata.
    scan: PathBuf,
    /// Background polynomial degree (2 or 3).
    #[arg(long)]
    degree: Option<u8>,
    /// Disable iterative outlier rejection.
    #[arg(long)]
    no_robust: bool,
    /// Crossing flag threshold in half-linewidths.
    #[arg(long)]
    threshold: Option<f64>,
    /// Linewidth kappa/2pi in Hz; overrides scan metadata.
    #[arg(long, value_name = "HZ")]
    kappa_hz: Option<f64>,
    /// Known FSR mismatch of the crossing family in Hz per mode; resolves
    /// g and kappa_c exactly instead of the documented gauge.
    #[arg(long, value_name = "HZ")]
    fsr_mismatch_hz: Option<f64>,
    /// Target FSR in Hz recorded in the output device file.
    #[arg(long, value_name = "HZ")]
    fsr_hz: Option<f64>,
    /// Extraction efficiency recorded in the output device file.
    #[arg(long)]
    eta_e: Option<f64>,
    /// Write the per-mode residual table here.
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
    /// Write the fitted device model here.
    #[arg(long, value_name = "FILE")]
    device_out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match config::load(cli.config.as_deref()) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!("error: {err:#}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Spectrum(args) => commands::spectrum(args, cfg.spectrum),
        Command::Verify(args) => commands::verify(args, cfg.verify),
        Command::Calibrate(args) => commands::calibrate(args, cfg.calibrate),
        Command::Plan(args) => commands::plan(args, cfg.plan),
        Command::Fit(args) => commands::fit(args, cfg.fit),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
