//! Bandwidth planning: which pairs (k, -k) fall in the uniform squeezing
//! regime alpha <= zeta_k <= 3 alpha, how the count behaves as the pump
//! detuning moves, and how much squeezing varies across the regime.
//!
//! Counting uses the pure quadratic detuning model zeta_k = zeta0 +
//! (d2_norm/2) k^2; crossing-aware counting is a separate entry point that
//! walks the full device model.

use serde::Serialize;

use crate::modes::{self, DeviceModel, ModeError};
use crate::squeezing;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Grid step used by [`optimize_zeta0`].
pub const OPTIMIZE_STEP: f64 = 0.01;

/// Default step for detuning sweeps. Coarser than the optimizer grid on
/// purpose: at much finer steps the count is not monotone in zeta0 (a pair
/// can exit through the upper regime edge one step before new pairs enter
/// at the lower edge), which is real staircase behavior, not noise.
pub const SWEEP_STEP: f64 = 0.1;

#[derive(Debug, Clone, Serialize)]
pub struct RegimePlan {
    pub alpha: f64,
    pub zeta0: f64,
    pub regime_low: f64,
    pub regime_high: f64,
    pub pair_indices: Vec<i32>,
    pub n_pairs: usize,
    pub k_min: Option<i32>,
    pub k_max: Option<i32>,
    /// Continuum estimate 2 sqrt(alpha / d2_norm) of the count at zeta0 = alpha.
    pub estimate: f64,
}

/// The detuning interval [alpha, 3 alpha] inside which the noise reduction
/// stays within ~8% of its optimum.
pub fn uniform_regime(alpha: f64) -> (f64, f64) {
    (alpha, 3.0 * alpha)
}

/// Brute-force count of pairs whose quadratic-model detuning lands in the
/// uniform regime. k runs over 1..=k_max_available.
pub fn count_uniform_pairs(
    alpha: f64,
    zeta0: f64,
    d2_norm: f64,
    k_max_available: i32,
) -> RegimePlan {
    let (lo, hi) = uniform_regime(alpha);
    let mut pair_indices = Vec::new();
    for k in 1..=k_max_available.max(0) {
        let zeta = zeta0 + d2_norm * f64::from(k) * f64::from(k) / 2.0;
        if zeta >= lo && zeta <= hi {
            pair_indices.push(k);
        }
    }
    let (k_min, k_max) = (pair_indices.first().copied(), pair_indices.last().copied());
    RegimePlan {
        alpha,
        zeta0,
        regime_low: lo,
        regime_high: hi,
        n_pairs: pair_indices.len(),
        k_min,
        k_max,
        pair_indices,
        estimate: pairs_estimate(alpha, d2_norm),
    }
}

/// Continuum scaling of the best-case pair count.
pub fn pairs_estimate(alpha: f64, d2_norm: f64) -> f64 {
    2.0 * (alpha / d2_norm).sqrt()
}

/// Count with the full device model: detunings come from
/// [`modes::pair_detunings`] (dispersion, crossings, raw shifts), the regime
/// test uses the pair average, and pairs whose AMX loss perturbation exceeds
/// `dkappa_max` are excluded as unusable.
pub fn count_uniform_pairs_device(
    dev: &DeviceModel,
    alpha: f64,
    zeta0: f64,
    k_max_available: i32,
    dkappa_max: f64,
) -> Result<RegimePlan, ModeError> {
    let (lo, hi) = uniform_regime(alpha);
    let mut pair_indices = Vec::new();
    for k in 1..=k_max_available.max(0) {
        let det = modes::pair_detunings(dev, k, zeta0)?;
        let usable = det.dkappa_plus.max(det.dkappa_minus) <= dkappa_max;
        if usable && det.zeta_bar >= lo && det.zeta_bar <= hi {
            pair_indices.push(k);
        }
    }
    let hk = dev.target.half_kappa();
    let d2_norm = dev.target.d2 / hk;
    let (k_min, k_max) = (pair_indices.first().copied(), pair_indices.last().copied());
    Ok(RegimePlan {
        alpha,
        zeta0,
        regime_low: lo,
        regime_high: hi,
        n_pairs: pair_indices.len(),
        k_min,
        k_max,
        pair_indices,
        estimate: pairs_estimate(alpha, d2_norm),
    })
}

/// Maximize the pair count over zeta0 in [0, zeta0_max] on a fixed grid,
/// breaking ties toward smaller zeta0.
pub fn optimize_zeta0(
    alpha: f64,
    d2_norm: f64,
    zeta0_max: f64,
    k_max_available: i32,
) -> (f64, RegimePlan) {
    optimize_zeta0_with_step(alpha, d2_norm, zeta0_max, k_max_available, OPTIMIZE_STEP)
}

pub fn optimize_zeta0_with_step(
    alpha: f64,
    d2_norm: f64,
    zeta0_max: f64,
    k_max_available: i32,
    step: f64,
) -> (f64, RegimePlan) {
    let mut best: Option<(f64, RegimePlan)> = None;
    for zeta0 in grid(zeta0_max, step) {
        let plan = count_uniform_pairs(alpha, zeta0, d2_norm, k_max_available);
        let better = match &best {
            None => true,
            Some((_, b)) => plan.n_pairs > b.n_pairs,
        };
        if better {
            best = Some((zeta0, plan));
        }
    }
    best.expect("grid is never empty")
}

/// Pair counts along a zeta0 grid from 0 to zeta0_max inclusive.
pub fn sweep_zeta0(
    alpha: f64,
    d2_norm: f64,
    zeta0_max: f64,
    step: f64,
    k_max_available: i32,
) -> Vec<RegimePlan> {
    grid(zeta0_max, step)
        .map(|z| count_uniform_pairs(alpha, z, d2_norm, k_max_available))
        .collect()
}

fn grid(max: f64, step: f64) -> impl Iterator<Item = f64> {
    let n = if max <= 0.0 || step <= 0.0 {
        0
    } else {
        // snap to the grid; tolerate max that is a hair under a multiple of step
        (max / step + 1e-9).floor() as usize
    };
    (0..=n).map(move |i| i as f64 * step)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Degradation {
    /// Squeezing-level gap between the regime edges and the optimum, dB.
    pub db: f64,
    /// Worst edge-to-optimum ratio of noise reductions (1 - Var); independent
    /// of eta, which cancels.
    pub reduction_ratio: f64,
}

/// How much squeezing is lost at the edges of the uniform regime relative to
/// the optimum at zeta = 2 alpha.
pub fn degradation_within_regime(alpha: f64, eta: f64) -> Degradation {
    let opt = squeezing::variance_no_amx(alpha, 2.0 * alpha, eta);
    let lo = squeezing::variance_no_amx(alpha, alpha, eta);
    let hi = squeezing::variance_no_amx(alpha, 3.0 * alpha, eta);
    let worst = if lo.variance >= hi.variance { lo } else { hi };
    Degradation {
        db: worst.sl_db - opt.sl_db,
        reduction_ratio: (1.0 - worst.variance) / (1.0 - opt.variance),
    }
}

/// Normalized second-order dispersion D2 / (kappa/2) from laboratory numbers:
/// D2/2pi in Hz, the pump wavelength, and the loaded quality factor. Assumes
/// kappa = omega0 / Q with omega0 = 2 pi c / lambda.
pub fn d2_norm_from_physical(d2_hz: f64, wavelength_m: f64, q_loaded: f64) -> f64 {
    let f0 = SPEED_OF_LIGHT / wavelength_m;
    2.0 * d2_hz * q_loaded / f0
}
