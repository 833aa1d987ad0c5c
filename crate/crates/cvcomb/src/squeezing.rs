//! Closed-form sum-quadrature variance of an EPR pair below threshold.
//!
//! For the pair (k, -k) with average detuning zeta_bar, asymmetry delta and
//! normalized pump coupling alpha, the shot-noise-normalized variance of the
//! optimally phased sum quadrature at zero offset frequency is
//!
//!   Var = 1 - eta * 2 / (1 + sqrt(1 + Lambda / (4 alpha^2)))
//!   Lambda = (1 - alpha^2 + (zeta_bar - 2 alpha)^2 - delta^2)^2 + 4 delta^2
//!
//! with eta the product of extraction and detection efficiency. The formula
//! assumes mode-independent loss; [`spectrum`] flags rows where AMX loss
//! perturbations make that assumption doubtful. The independent check lives
//! in [`crate::langevin`].

use std::ops::RangeInclusive;

use thiserror::Error;

use crate::modes::{self, DeviceModel, ModeError};

#[derive(Debug, Error)]
pub enum SqueezeError {
    #[error(transparent)]
    Modes(#[from] ModeError),
    #[error(transparent)]
    Pump(#[from] PumpError),
}

#[derive(Debug, Error)]
pub enum PumpError {
    #[error("alpha must satisfy 0 <= alpha < 1 to stay below the oscillation threshold, got {0}")]
    OutsideThreshold(f64),
    #[error("{name} must lie in [0, 1], got {value}")]
    BadEfficiency { name: &'static str, value: f64 },
}

/// Normalized pump condition: coupling alpha = g|A0|^2/(kappa/2), detuning
/// zeta0, and the two efficiencies. All dimensionless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpCondition {
    pub alpha: f64,
    pub zeta0: f64,
    pub eta_e: f64,
    pub eta_d: f64,
}

impl PumpCondition {
    pub fn validate(&self) -> Result<(), PumpError> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(PumpError::OutsideThreshold(self.alpha));
        }
        for (name, value) in [("eta_e", self.eta_e), ("eta_d", self.eta_d)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(PumpError::BadEfficiency { name, value });
            }
        }
        Ok(())
    }

    pub fn eta(&self) -> f64 {
        self.eta_e * self.eta_d
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceResult {
    pub variance: f64,
    pub sl_db: f64,
    pub lambda: f64,
}

/// One spectrum row for the pair (k, -k); mirrors the CSV the CLI emits.
/// `warn` marks pairs whose AMX loss perturbation exceeded the caller's
/// threshold, where the uniform-loss closed form starts to mislead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRow {
    pub k: i32,
    pub zeta_bar: f64,
    pub delta: f64,
    pub dkappa_plus: f64,
    pub dkappa_minus: f64,
    pub eta: f64,
    pub variance: f64,
    pub sl_db: f64,
    pub warn: bool,
}

pub fn lambda_k(alpha: f64, zeta_bar: f64, delta: f64) -> f64 {
    let u = 1.0 - alpha * alpha + (zeta_bar - 2.0 * alpha).powi(2) - delta * delta;
    u * u + 4.0 * delta * delta
}

/// The closed form quoted above. alpha = 0 returns the vacuum limit
/// (variance exactly 1) instead of dividing by zero; the limit is what every
/// sweep wants there.
pub fn sum_quadrature_variance(alpha: f64, zeta_bar: f64, delta: f64, eta: f64) -> VarianceResult {
    let lambda = lambda_k(alpha, zeta_bar, delta);
    let variance = if alpha == 0.0 {
        1.0
    } else {
        1.0 - eta * 2.0 / (1.0 + (1.0 + lambda / (4.0 * alpha * alpha)).sqrt())
    };
    VarianceResult { variance, sl_db: 10.0 * variance.log10(), lambda }
}

/// Symmetric-pair special case (delta = 0); minimal over zeta at zeta = 2 alpha.
pub fn variance_no_amx(alpha: f64, zeta_k: f64, eta: f64) -> VarianceResult {
    sum_quadrature_variance(alpha, zeta_k, 0.0, eta)
}

/// Closed-form squeezing for every pair in `k_range`. Each pair's efficiency
/// is eta_d times the geometric mean of the two members' extraction
/// efficiencies (exact for symmetric tables, a documented compromise for
/// asymmetric ones; the Langevin oracle carries per-mode values exactly).
pub fn spectrum(
    dev: &DeviceModel,
    pump: &PumpCondition,
    k_range: RangeInclusive<i32>,
    dkappa_warn: f64,
) -> Result<Vec<SpectrumRow>, SqueezeError> {
    pump.validate()?;
    dev.validate()?;
    let mut rows = Vec::new();
    for k in k_range {
        let det = modes::pair_detunings(dev, k, pump.zeta0)?;
        let eta = (dev.eta_e.get(k) * dev.eta_e.get(-k)).sqrt() * pump.eta_d;
        let v = sum_quadrature_variance(pump.alpha, det.zeta_bar, det.delta, eta);
        rows.push(SpectrumRow {
            k,
            zeta_bar: det.zeta_bar,
            delta: det.delta,
            dkappa_plus: det.dkappa_plus,
            dkappa_minus: det.dkappa_minus,
            eta,
            variance: v.variance,
            sl_db: v.sl_db,
            warn: det.dkappa_plus.max(det.dkappa_minus) > dkappa_warn,
        });
    }
    Ok(rows)
}
