//! Mapping between laboratory observables (pump power, cavity transmission)
//! and the normalized pump parameters (alpha, zeta0).
//!
//! These are pure operating-point formulas; they are used below and at
//! threshold for calibration even though they are derived at the oscillation
//! point, so no regime policing happens here.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("eta_e must lie in [0, 1], got {0}")]
    BadEfficiency(f64),
    #[error("transmission {t} is outside the achievable interval [{lo:.6}, 1) for eta_e = {eta_e}")]
    UnreachableTransmission { t: f64, lo: f64, eta_e: f64 },
}

/// One calibration table row. `power_w` is present when a threshold power
/// was supplied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationPoint {
    pub alpha: f64,
    pub zeta0: f64,
    pub eta_e: f64,
    pub f_squared: f64,
    pub transmission: f64,
    pub p_threshold_w: Option<f64>,
    pub power_w: Option<f64>,
}

/// Normalized pump power f^2 = alpha (1 + (zeta0 - alpha)^2) needed to hold
/// intracavity coupling alpha at detuning zeta0. f^2 = 1 is threshold at the
/// optimal detuning.
pub fn normalized_pump_power(alpha: f64, zeta0: f64) -> f64 {
    alpha * (1.0 + (zeta0 - alpha).powi(2))
}

/// Absolute power for a normalized pump power, given the measured threshold.
pub fn required_power(f_squared: f64, p_threshold: f64) -> f64 {
    f_squared * p_threshold
}

/// Normalized cavity transmission at the pump:
/// T = 1 - 4 eta_e (1 - eta_e) / (1 + (zeta0 - alpha)^2).
pub fn transmission(alpha: f64, zeta0: f64, eta_e: f64) -> f64 {
    1.0 - 4.0 * eta_e * (1.0 - eta_e) / (1.0 + (zeta0 - alpha).powi(2))
}

/// Invert the transmission formula for alpha. Locking to a transmission level
/// is two-valued; both roots come back (ascending) and the caller picks by
/// context. At the dip bottom the roots coincide at zeta0.
pub fn solve_alpha_from_transmission(
    t: f64,
    zeta0: f64,
    eta_e: f64,
) -> Result<[f64; 2], CalibrationError> {
    if !(0.0..=1.0).contains(&eta_e) {
        return Err(CalibrationError::BadEfficiency(eta_e));
    }
    let lo = 1.0 - 4.0 * eta_e * (1.0 - eta_e);
    if !(t >= lo && t < 1.0) {
        return Err(CalibrationError::UnreachableTransmission { t, lo, eta_e });
    }
    let disc = 4.0 * eta_e * (1.0 - eta_e) / (1.0 - t) - 1.0;
    // rounding can push the dip bottom a hair negative
    let root = disc.max(0.0).sqrt();
    Ok([zeta0 - root, zeta0 + root])
}

/// Full table row for one (alpha, zeta0) operating point.
pub fn calibration_point(
    alpha: f64,
    zeta0: f64,
    eta_e: f64,
    p_threshold_w: Option<f64>,
) -> Result<CalibrationPoint, CalibrationError> {
    if !(0.0..=1.0).contains(&eta_e) {
        return Err(CalibrationError::BadEfficiency(eta_e));
    }
    let f_squared = normalized_pump_power(alpha, zeta0);
    Ok(CalibrationPoint {
        alpha,
        zeta0,
        eta_e,
        f_squared,
        transmission: transmission(alpha, zeta0, eta_e),
        p_threshold_w,
        power_w: p_threshold_w.map(|p| required_power(f_squared, p)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pump_power_hand_values() {
        assert_abs_diff_eq!(normalized_pump_power(0.8, 0.4), 0.928, epsilon = 1e-12);
        assert_abs_diff_eq!(normalized_pump_power(0.8, 0.0), 1.312, epsilon = 1e-12);
        assert_eq!(normalized_pump_power(0.0, 0.7), 0.0);
    }

    #[test]
    fn required_power_is_a_product() {
        assert_abs_diff_eq!(required_power(0.928, 32e-6) * 1e6, 29.696, epsilon = 1e-9);
        assert_eq!(required_power(0.0, 1.0), 0.0);
        assert_eq!(required_power(1.0, 32e-6), 32e-6);
    }

    #[test]
    fn transmission_hand_values() {
        assert_eq!(transmission(0.3, 1.1, 1.0), 1.0);
        assert_abs_diff_eq!(transmission(0.8, 0.0, 0.85), 0.6890243902439024, epsilon = 1e-12);
        assert_abs_diff_eq!(transmission(0.8, 0.4, 0.85), 0.5603448275862069, epsilon = 1e-12);
    }

    #[test]
    fn transmission_inversion_recovers_the_operating_point() {
        let t = transmission(0.8, 0.0, 0.85);
        let roots = solve_alpha_from_transmission(t, 0.0, 0.85).unwrap();
        assert_abs_diff_eq!(roots[0], -0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(roots[1], 0.8, epsilon = 1e-12);
    }

    #[test]
    fn dip_bottom_is_a_double_root() {
        let eta_e = 0.85;
        let lo = 1.0 - 4.0 * eta_e * (1.0 - eta_e);
        let roots = solve_alpha_from_transmission(lo, 0.37, eta_e).unwrap();
        assert_abs_diff_eq!(roots[0], 0.37, epsilon = 1e-7);
        assert_abs_diff_eq!(roots[1], 0.37, epsilon = 1e-7);
    }

    #[test]
    fn unreachable_transmission_names_the_interval() {
        let err = solve_alpha_from_transmission(0.2, 0.0, 0.85).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("achievable interval"), "{msg}");
    }

    #[test]
    fn transmission_depends_only_on_the_detuning_offset() {
        for (a, z) in [(0.8, 0.3), (0.1, -0.2), (0.55, 0.55)] {
            let plus = transmission(a, z, 0.85);
            let minus = transmission(z, a, 0.85);
            assert_abs_diff_eq!(plus, minus, epsilon = 1e-15);
        }
    }

    #[test]
    fn pump_power_is_minimized_on_resonance() {
        let alpha = 0.73;
        let at_alpha = normalized_pump_power(alpha, alpha);
        assert_abs_diff_eq!(at_alpha, alpha, epsilon = 1e-15);
        for z in [-0.5, 0.0, 0.4, 1.0, 2.0] {
            assert!(normalized_pump_power(alpha, z) >= at_alpha);
        }
    }

    #[test]
    fn table_row_carries_power_when_threshold_known() {
        let p = calibration_point(0.8, 0.4, 0.85, Some(32e-6)).unwrap();
        assert_abs_diff_eq!(p.power_w.unwrap() * 1e6, 29.696, epsilon = 1e-6);
        let q = calibration_point(0.8, 0.4, 0.85, None).unwrap();
        assert!(q.power_w.is_none());
    }
}
