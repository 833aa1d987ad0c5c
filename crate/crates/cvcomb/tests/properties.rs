//! Parameter-space invariants that must hold everywhere, not just at the
//! frozen checkpoints.

use cvcomb::calibration;
use cvcomb::langevin;
use cvcomb::planner;
use cvcomb::squeezing;
use proptest::prelude::*;

proptest! {
    /// The detected variance is a physical noise level: in (0, 1] below
    /// threshold, never below the efficiency-limited floor, and linear
    /// losses only ever move it toward vacuum.
    #[test]
    fn variance_is_bounded_and_degrades_with_loss(
        alpha in 0.0..0.99f64,
        zeta_bar in -5.0..5.0f64,
        delta in 0.0..6.0f64,
        eta_lo in 0.0..1.0f64,
        eta_hi in 0.0..1.0f64,
    ) {
        let (eta_lo, eta_hi) = if eta_lo <= eta_hi { (eta_lo, eta_hi) } else { (eta_hi, eta_lo) };
        let v_lo = squeezing::sum_quadrature_variance(alpha, zeta_bar, delta, eta_lo).variance;
        let v_hi = squeezing::sum_quadrature_variance(alpha, zeta_bar, delta, eta_hi).variance;
        prop_assert!(v_hi > 0.0 && v_hi <= 1.0 + 1e-15);
        prop_assert!(v_lo >= v_hi - 1e-15, "more loss cannot squeeze harder");
        prop_assert!(v_lo >= 1.0 - eta_lo - 1e-15, "floor set by efficiency");
    }

    /// Wherever the pair detuning error is small enough, any mode splitting
    /// strictly hurts; the closed form must be monotone in the splitting.
    #[test]
    fn splitting_is_monotone_in_the_guaranteed_region(
        alpha in 0.05..0.99f64,
        detuning_err in -1.0..1.0f64,
        d1 in 0.0..6.0f64,
        d2 in 0.0..6.0f64,
        eta in 0.1..1.0f64,
    ) {
        let spread = (1.0 + alpha * alpha).sqrt();
        let zeta_bar = 2.0 * alpha + detuning_err * spread * 0.999;
        let (d1, d2) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let v1 = squeezing::sum_quadrature_variance(alpha, zeta_bar, d1, eta).variance;
        let v2 = squeezing::sum_quadrature_variance(alpha, zeta_bar, d2, eta).variance;
        prop_assert!(v2 >= v1 - 1e-12);
    }

    /// The frequency-domain solution cannot tell the two pair members apart:
    /// flipping the sign of the splitting leaves every detected variance
    /// unchanged.
    #[test]
    fn splitting_sign_is_unobservable(
        alpha in 0.0..0.95f64,
        zeta_bar in -2.0..3.0f64,
        delta in 0.0..4.0f64,
        eta_e in 0.3..1.0f64,
        eta_d in 0.3..1.0f64,
    ) {
        let plus = langevin::sum_quadrature_variance_oracle(alpha, zeta_bar, delta, eta_e, eta_d, 0.0).unwrap();
        let minus = langevin::sum_quadrature_variance_oracle(alpha, zeta_bar, -delta, eta_e, eta_d, 0.0).unwrap();
        prop_assert!((plus - minus).abs() <= 1e-10 * plus.max(1.0));
    }

    /// Measuring the dip transmission and inverting it must recover the pump
    /// parameter that produced it (as one of the two branches).
    #[test]
    fn transmission_inversion_round_trips(
        alpha in 0.05..0.95f64,
        zeta0 in -2.0..2.0f64,
        eta_e in 0.5..0.98f64,
    ) {
        let t = calibration::transmission(alpha, zeta0, eta_e);
        let roots = calibration::solve_alpha_from_transmission(t, zeta0, eta_e).unwrap();
        let best = roots.iter().map(|r| (r - alpha).abs()).fold(f64::INFINITY, f64::min);
        prop_assert!(best <= 1e-9 * alpha.max(1.0), "roots {roots:?} vs alpha {alpha}");
    }

    /// The quadratic detuning walk is monotone for k >= 1, so the pairs that
    /// land inside the regime always form one contiguous run whose edges sit
    /// exactly at the interval boundary.
    #[test]
    fn regime_membership_is_contiguous(
        alpha in 0.01..2.0f64,
        zeta0 in 0.0..3.0f64,
        d2_norm in 1e-4..0.1f64,
    ) {
        let plan = planner::count_uniform_pairs(alpha, zeta0, d2_norm, 300);
        let inside = |k: i32| {
            let z = zeta0 + d2_norm * f64::from(k) * f64::from(k) / 2.0;
            (plan.regime_low..=plan.regime_high).contains(&z)
        };
        if let (Some(k_min), Some(k_max)) = (plan.k_min, plan.k_max) {
            prop_assert_eq!(plan.n_pairs, (k_max - k_min + 1) as usize);
            prop_assert!(inside(k_min) && inside(k_max));
            prop_assert!(k_min == 1 || !inside(k_min - 1));
            prop_assert!(k_max == 300 || !inside(k_max + 1));
        } else {
            prop_assert_eq!(plan.n_pairs, 0);
            prop_assert!((1..=300).all(|k| !inside(k)));
        }
    }

    /// Task-derived seeds never collide across a realistic task range.
    #[test]
    fn derived_seeds_are_distinct(root in any::<u64>()) {
        let mut seen = std::collections::HashSet::new();
        for task in 0..64u64 {
            prop_assert!(seen.insert(langevin::derive_seed(root, task)));
        }
    }
}
