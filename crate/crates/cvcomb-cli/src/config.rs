//! Optional TOML configuration. Every field mirrors a command-line flag and
//! every flag wins over the file, so a config file is just a set of saved
//! defaults for a device under study.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub calibrate: CalibrateConfig,
    #[serde(default)]
    pub plan: PlanConfig,
    #[serde(default)]
    pub fit: FitConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub device: Option<PathBuf>,
    pub d2_hz: Option<f64>,
    pub d3_hz: Option<f64>,
    pub kappa_hz: Option<f64>,
    pub alpha: Option<f64>,
    pub zeta0: Option<f64>,
    pub eta_e: Option<f64>,
    pub eta_d: Option<f64>,
    pub k_min: Option<i32>,
    pub k_max: Option<i32>,
    pub dkappa_warn: Option<f64>,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub tol: Option<f64>,
    pub quick: Option<bool>,
    pub stochastic: Option<bool>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    pub alpha: Option<f64>,
    pub zeta0: Option<Vec<f64>>,
    pub eta_e: Option<f64>,
    pub pth_uw: Option<f64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    pub alpha: Option<f64>,
    pub d2_norm: Option<f64>,
    pub d2_hz: Option<f64>,
    pub kappa_hz: Option<f64>,
    pub wavelength_nm: Option<f64>,
    pub q_loaded: Option<f64>,
    pub zeta0_max: Option<f64>,
    pub k_max: Option<i32>,
    pub out: Option<PathBuf>,
    pub sweep_out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub degree: Option<u8>,
    pub robust: Option<bool>,
    pub threshold: Option<f64>,
    pub kappa_hz: Option<f64>,
    pub fsr_mismatch_hz: Option<f64>,
    pub fsr_hz: Option<f64>,
    pub eta_e: Option<f64>,
    pub report: Option<PathBuf>,
    pub device_out: Option<PathBuf>,
}

pub fn load(path: Option<&Path>) -> anyhow::Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}
