//! Independent verification path for the closed-form squeezing formula:
//! linearized quadrature dynamics of one pair (k, -k), frequency-domain
//! input-output solution for the detected covariance, and a seeded
//! Euler-Maruyama estimator for the same variance from simulated time records.
//!
//! Everything is in normalized units (rates in kappa/2, time in 2/kappa).
//! The quadrature basis is (x_k, p_k, x_-k, p_-k) with x = (a + a*)/sqrt(2).
//!
//! Noise normalization is fixed operationally, not by bookkeeping prefactors:
//! at alpha = 0 the detected covariance must be the identity at every offset
//! frequency for every efficiency. That vacuum contract leaves no freedom in
//! the input-output matrices below and is asserted in the tests.

use nalgebra::{Complex, Matrix2, Matrix4, SMatrix, SVector, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Total loss of a mode in units of kappa/2 when nothing perturbs it.
pub const UNIFORM_LOSS: f64 = 2.0;

type C64 = Complex<f64>;
type Matrix4x12 = SMatrix<f64, 4, 12>;
type CMatrix4 = SMatrix<C64, 4, 4>;
type CMatrix4x12 = SMatrix<C64, 4, 12>;

#[derive(Debug, Error)]
pub enum LangevinError {
    #[error("mode losses must be positive, got loss_plus = {0}, loss_minus = {1}")]
    NonpositiveLoss(f64, f64),
    #[error("efficiency {name} must lie in [0, 1], got {value}")]
    BadEfficiency { name: &'static str, value: f64 },
    #[error("drift is unstable: eigenvalue {re:.6} {im:+.6}i has nonnegative real part (pump at or above oscillation threshold)")]
    Unstable { re: f64, im: f64 },
    #[error("frequency-domain system is singular at omega = {0}")]
    Singular(f64),
    #[error("step {step} too coarse for spectral radius {radius:.3}: need step * max|eigenvalue| < 0.1")]
    StepTooCoarse { step: f64, radius: f64 },
    #[error("duration {duration} gives {windows} analysis windows of length {window}; need at least 2 after the burn-in window")]
    DurationTooShort { duration: f64, window: f64, windows: usize },
    #[error("step and window must be positive, got step = {step}, window = {window}")]
    BadStepping { step: f64, window: f64 },
}

/// Drift and detection parameters of one EPR pair.
#[derive(Debug, Clone)]
pub struct PairDynamics {
    pub drift: Matrix4<f64>,
    pub loss_plus: f64,
    pub loss_minus: f64,
    pub eta_e_plus: f64,
    pub eta_e_minus: f64,
    pub eta_d: f64,
}

/// Detected quadrature spectral covariance at one offset frequency,
/// shot-noise normalized (unit diagonal at alpha = 0).
#[derive(Debug, Clone)]
pub struct OutputCovariance {
    pub omega: f64,
    pub cov: Matrix4<f64>,
}

/// Build the quadrature drift for couplings (alpha), detunings
/// (zeta_bar +/- delta) and per-mode normalized losses. With uniform loss 2
/// this is the standard below-threshold pair drift; unequal losses model
/// AMX loss asymmetry, which the closed form cannot.
pub fn drift_matrix(
    alpha: f64,
    zeta_bar: f64,
    delta: f64,
    loss_plus: f64,
    loss_minus: f64,
) -> Result<PairDynamics, LangevinError> {
    if loss_plus <= 0.0 || loss_minus <= 0.0 || loss_plus.is_nan() || loss_minus.is_nan() {
        return Err(LangevinError::NonpositiveLoss(loss_plus, loss_minus));
    }
    let zt_p = zeta_bar + delta - 2.0 * alpha;
    let zt_m = zeta_bar - delta - 2.0 * alpha;
    let lp = loss_plus / 2.0;
    let lm = loss_minus / 2.0;
    #[rustfmt::skip]
    let drift = Matrix4::new(
        -lp,    zt_p,  0.0,   alpha,
        -zt_p, -lp,    alpha, 0.0,
         0.0,   alpha, -lm,   zt_m,
         alpha, 0.0,   -zt_m, -lm,
    );
    Ok(PairDynamics {
        drift,
        loss_plus,
        loss_minus,
        eta_e_plus: 1.0,
        eta_e_minus: 1.0,
        eta_d: 1.0,
    })
}

impl PairDynamics {
    /// Uniform-loss pair with unit efficiencies.
    pub fn symmetric(alpha: f64, zeta_bar: f64, delta: f64) -> Self {
        drift_matrix(alpha, zeta_bar, delta, UNIFORM_LOSS, UNIFORM_LOSS)
            .expect("uniform loss is positive")
    }

    pub fn with_efficiencies(
        mut self,
        eta_e_plus: f64,
        eta_e_minus: f64,
        eta_d: f64,
    ) -> Result<Self, LangevinError> {
        for (name, value) in [
            ("eta_e_plus", eta_e_plus),
            ("eta_e_minus", eta_e_minus),
            ("eta_d", eta_d),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(LangevinError::BadEfficiency { name, value });
            }
        }
        self.eta_e_plus = eta_e_plus;
        self.eta_e_minus = eta_e_minus;
        self.eta_d = eta_d;
        Ok(self)
    }

    /// Largest real part over the drift spectrum; stable iff negative.
    pub fn max_re_eigenvalue(&self) -> f64 {
        self.drift
            .complex_eigenvalues()
            .iter()
            .map(|e| e.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn spectral_radius(&self) -> f64 {
        self.drift
            .complex_eigenvalues()
            .iter()
            .map(|e| e.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_stable(&self) -> bool {
        self.max_re_eigenvalue() < 0.0
    }

    fn require_stable(&self) -> Result<(), LangevinError> {
        let eigs = self.drift.complex_eigenvalues();
        let worst = eigs.iter().max_by(|a, b| a.re.total_cmp(&b.re)).copied().unwrap();
        if worst.re >= 0.0 {
            return Err(LangevinError::Unstable { re: worst.re, im: worst.im });
        }
        Ok(())
    }

    /// Input matrix B (state <- noises), measurement matrix C and direct
    /// feedthrough D (detected fields <- state, noises). Noise channel order:
    /// external +k (x, p), intrinsic +k, external -k, intrinsic -k, then the
    /// four detection vacua. The split of each mode's loss into external and
    /// intrinsic channels carries eta_e; eta_d mixes in detection vacuum.
    fn io_matrices(&self) -> (Matrix4x12, Matrix4<f64>, Matrix4x12) {
        let (lp, lm) = (self.loss_plus, self.loss_minus);
        let (eep, eem, ed) = (self.eta_e_plus, self.eta_e_minus, self.eta_d);

        let mut b = Matrix4x12::zeros();
        b[(0, 0)] = (lp * eep).sqrt();
        b[(1, 1)] = (lp * eep).sqrt();
        b[(0, 2)] = (lp * (1.0 - eep)).sqrt();
        b[(1, 3)] = (lp * (1.0 - eep)).sqrt();
        b[(2, 4)] = (lm * eem).sqrt();
        b[(3, 5)] = (lm * eem).sqrt();
        b[(2, 6)] = (lm * (1.0 - eem)).sqrt();
        b[(3, 7)] = (lm * (1.0 - eem)).sqrt();

        let sd = ed.sqrt();
        let c = Matrix4::from_diagonal(&Vector4::new(
            sd * (lp * eep).sqrt(),
            sd * (lp * eep).sqrt(),
            sd * (lm * eem).sqrt(),
            sd * (lm * eem).sqrt(),
        ));

        let mut d = Matrix4x12::zeros();
        d[(0, 0)] = -sd;
        d[(1, 1)] = -sd;
        d[(2, 4)] = -sd;
        d[(3, 5)] = -sd;
        let sv = (1.0 - ed).sqrt();
        d[(0, 8)] = sv;
        d[(1, 9)] = sv;
        d[(2, 10)] = sv;
        d[(3, 11)] = sv;

        (b, c, d)
    }

    /// Detected quadrature covariance at offset frequency `omega`: solve the
    /// linear frequency-domain system for the transfer matrix T(omega) from
    /// the twelve vacuum inputs to the four detected quadratures, then
    /// S = Re(T T^dagger).
    pub fn output_covariance(&self, omega: f64) -> Result<OutputCovariance, LangevinError> {
        self.require_stable()?;
        let (b, c, d) = self.io_matrices();
        let iw = C64::new(0.0, -omega);
        let mut m = self.drift.map(|x| C64::new(-x, 0.0));
        for i in 0..4 {
            m[(i, i)] += iw;
        }
        let g: CMatrix4 = m.try_inverse().ok_or(LangevinError::Singular(omega))?;
        let cb: CMatrix4x12 =
            c.map(|x| C64::new(x, 0.0)) * g * b.map(|x| C64::new(x, 0.0));
        let t = cb + d.map(|x| C64::new(x, 0.0));
        let s = t * t.adjoint();
        Ok(OutputCovariance { omega, cov: s.map(|z| z.re) })
    }
}

impl OutputCovariance {
    /// 2x2 covariance of the sum mode quadratures
    /// ((x_k + x_-k)/sqrt(2), (p_k + p_-k)/sqrt(2)).
    pub fn sum_block(&self) -> Matrix2<f64> {
        let s = &self.cov;
        let sxx = (s[(0, 0)] + s[(2, 2)] + 2.0 * s[(0, 2)]) / 2.0;
        let spp = (s[(1, 1)] + s[(3, 3)] + 2.0 * s[(1, 3)]) / 2.0;
        let sxp = (s[(0, 1)] + s[(0, 3)] + s[(2, 1)] + s[(2, 3)]) / 2.0;
        Matrix2::new(sxx, sxp, sxp, spp)
    }

    /// Minimum sum-quadrature variance over a common local-oscillator phase
    /// applied to both detected fields, i.e. the smaller eigenvalue of
    /// [`sum_block`]. This is the quantity the closed form predicts: a fixed
    /// pump phase convention only rotates the optimal angle, never the value.
    pub fn min_sum_variance(&self) -> f64 {
        self.min_sum_variance_angle().0
    }

    /// Same, returning the optimal phase too.
    pub fn min_sum_variance_angle(&self) -> (f64, f64) {
        let blk = self.sum_block();
        let (a, b, c) = (blk[(0, 0)], blk[(0, 1)], blk[(1, 1)]);
        let half_gap = ((a - c) * (a - c) / 4.0 + b * b).sqrt();
        let lo = (a + c) / 2.0 - half_gap;
        // eigenvector of the smaller eigenvalue, (lo - c, b) up to degeneracy
        let theta = if b.abs() < 1e-300 && (a - c).abs() < 1e-300 {
            0.0
        } else if b.abs() < 1e-300 {
            if a <= c { 0.0 } else { std::f64::consts::FRAC_PI_2 }
        } else {
            b.atan2(lo - c).rem_euclid(std::f64::consts::PI)
        };
        (lo, theta)
    }

    /// Product of the sum-mode principal variances (determinant of the sum
    /// block). Rotation-invariant; >= 1 for any physical state at unit
    /// efficiency, = 1 for pure two-mode squeezing.
    pub fn uncertainty_product(&self) -> f64 {
        self.sum_block().determinant()
    }

    /// Smallest eigenvalue of the full 4x4 covariance (PSD check).
    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (self.cov + self.cov.transpose()) / 2.0;
        sym.symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn var_sum_x(&self) -> f64 {
        let s = &self.cov;
        (s[(0, 0)] + s[(2, 2)] + 2.0 * s[(0, 2)]) / 2.0
    }

    pub fn var_sum_p(&self) -> f64 {
        let s = &self.cov;
        (s[(1, 1)] + s[(3, 3)] + 2.0 * s[(1, 3)]) / 2.0
    }

    pub fn var_diff_x(&self) -> f64 {
        let s = &self.cov;
        (s[(0, 0)] + s[(2, 2)] - 2.0 * s[(0, 2)]) / 2.0
    }

    pub fn var_diff_p(&self) -> f64 {
        let s = &self.cov;
        (s[(1, 1)] + s[(3, 3)] - 2.0 * s[(1, 3)]) / 2.0
    }
}

/// Frequency-domain oracle for the closed form: optimally phased sum
/// variance of the uniform-loss pair at offset `omega`.
pub fn sum_quadrature_variance_oracle(
    alpha: f64,
    zeta_bar: f64,
    delta: f64,
    eta_e: f64,
    eta_d: f64,
    omega: f64,
) -> Result<f64, LangevinError> {
    let dyn_ = PairDynamics::symmetric(alpha, zeta_bar, delta)
        .with_efficiencies(eta_e, eta_e, eta_d)?;
    Ok(dyn_.output_covariance(omega)?.min_sum_variance())
}

#[derive(Debug, Clone, Copy)]
pub struct StochasticConfig {
    /// Total simulated time in units of 2/kappa.
    pub duration: f64,
    /// Euler-Maruyama step.
    pub step: f64,
    /// Length of one analysis window; the boxcar integral over a window is
    /// the low-pass filter whose variance estimates the omega ~ 0 spectrum.
    pub window: f64,
    pub seed: u64,
}

impl Default for StochasticConfig {
    fn default() -> Self {
        StochasticConfig { duration: 12_900.0, step: 0.01, window: 100.0, seed: 7 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StochasticEstimate {
    pub variance: f64,
    pub std_error: f64,
    pub n_windows: usize,
    /// Local-oscillator angle the record was demodulated at.
    pub theta: f64,
}

impl PairDynamics {
    /// Monte Carlo estimate of the low-frequency sum-quadrature variance.
    ///
    /// Integrates the pair dynamics with Euler-Maruyama, accumulating the
    /// detected sum quadrature (at the optimal phase found from the
    /// frequency-domain solution at omega = 0, so the estimate targets the
    /// same scalar as [`sum_quadrature_variance_oracle`]). The same Wiener
    /// increments drive the state update and the direct feedthrough, which
    /// makes the windowed integral telescope exactly; the estimator is then
    /// bias-free at leading order in the step, with only O(1/window) spectral
    /// leakage remaining. The first window is burn-in. Fixed seed gives a
    /// bit-identical result.
    pub fn stochastic_estimate(
        &self,
        cfg: &StochasticConfig,
    ) -> Result<StochasticEstimate, LangevinError> {
        self.require_stable()?;
        if cfg.step <= 0.0 || cfg.window <= 0.0 || cfg.step.is_nan() || cfg.window.is_nan() {
            return Err(LangevinError::BadStepping { step: cfg.step, window: cfg.window });
        }
        let radius = self.spectral_radius();
        if cfg.step * radius >= 0.1 {
            return Err(LangevinError::StepTooCoarse { step: cfg.step, radius });
        }
        let steps_per_window = (cfg.window / cfg.step).round().max(1.0) as usize;
        let total_steps = (cfg.duration / cfg.step).round() as usize;
        // first window is burn-in
        let n_windows = total_steps.saturating_sub(steps_per_window) / steps_per_window;
        if n_windows < 2 {
            return Err(LangevinError::DurationTooShort {
                duration: cfg.duration,
                window: cfg.window,
                windows: n_windows,
            });
        }

        let (b, c, d) = self.io_matrices();
        let theta = self.output_covariance(0.0)?.min_sum_variance_angle().1;
        let (ct, st) = (theta.cos(), theta.sin());
        let w = Vector4::new(ct, st, ct, st) / 2f64.sqrt();
        let c_row: Vector4<f64> = c.transpose() * w;
        let d_row: SVector<f64, 12> = d.transpose() * w;

        let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
        let sqh = cfg.step.sqrt();
        let mut q = Vector4::zeros();
        let mut dw = SVector::<f64, 12>::zeros();
        let mut acc = 0.0f64;
        let mut z2 = Vec::with_capacity(n_windows);
        let mut in_window = 0usize;
        let mut window_index: isize = -1;

        for _ in 0..steps_per_window * (n_windows + 1) {
            for j in 0..12 {
                let g: f64 = rng.sample(StandardNormal);
                dw[j] = g * sqh;
            }
            acc += c_row.dot(&q) * cfg.step + d_row.dot(&dw);
            q += self.drift * q * cfg.step + b * dw;
            in_window += 1;
            if in_window == steps_per_window {
                if window_index >= 0 {
                    let z = acc / cfg.window.sqrt();
                    z2.push(z * z);
                }
                acc = 0.0;
                in_window = 0;
                window_index += 1;
            }
        }

        let n = z2.len() as f64;
        let mean = z2.iter().sum::<f64>() / n;
        let var_of_z2 = z2.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        Ok(StochasticEstimate {
            variance: mean,
            std_error: (var_of_z2 / n).sqrt(),
            n_windows: z2.len(),
            theta,
        })
    }
}

/// Deterministic per-task seed stream: hash the root seed with the task index
/// so parallel or reordered sweeps reproduce bit-identically.
pub fn derive_seed(root: u64, task: u64) -> u64 {
    let mut z = root ^ task.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::squeezing;
    use approx::assert_abs_diff_eq;

    #[test]
    fn empty_cavity_drift_is_minus_identity() {
        let dyn_ = PairDynamics::symmetric(0.0, 0.0, 0.0);
        assert_eq!(dyn_.drift, -Matrix4::identity());
    }

    #[test]
    fn threshold_approach_slows_one_eigenvalue() {
        let dyn_ = PairDynamics::symmetric(0.999, 2.0 * 0.999, 0.0);
        assert_abs_diff_eq!(dyn_.max_re_eigenvalue(), -0.001, epsilon = 1e-9);
        assert!(dyn_.is_stable());
    }

    #[test]
    fn vacuum_contract_holds_at_every_frequency_and_efficiency() {
        for (ee, ed) in [(1.0, 1.0), (0.85, 0.7), (0.5, 0.5), (0.0, 1.0)] {
            for omega in [0.0, 0.7, 3.0, 50.0] {
                let s = PairDynamics::symmetric(0.0, 0.9, 0.3)
                    .with_efficiencies(ee, ee, ed)
                    .unwrap()
                    .output_covariance(omega)
                    .unwrap();
                let dev = (s.cov - Matrix4::identity()).abs().max();
                assert!(dev < 1e-12, "vacuum deviates by {dev} at omega={omega} ee={ee} ed={ed}");
            }
        }
    }

    #[test]
    fn oracle_matches_closed_form_at_reference_points() {
        let pts = [
            (0.8, 1.6, 0.0, 1.0, 1.0),
            (0.8, 1.6, 0.0, 1.0, 0.7),
            (0.8, 1.6, 10.0, 1.0, 0.7),
            (0.5, -0.3, 2.2, 0.85, 0.9),
        ];
        for (a, z, d, ee, ed) in pts {
            let oracle = sum_quadrature_variance_oracle(a, z, d, ee, ed, 0.0).unwrap();
            let formula = squeezing::sum_quadrature_variance(a, z, d, ee * ed).variance;
            assert_abs_diff_eq!(oracle, formula, epsilon = 1e-11);
        }
    }

    #[test]
    fn far_detuned_pair_barely_squeezes() {
        let v = sum_quadrature_variance_oracle(0.8, 1.6, 10.0, 1.0, 0.7, 0.0).unwrap();
        assert_abs_diff_eq!(v, 0.978303, epsilon = 1e-6);
    }

    #[test]
    fn out_of_band_variance_returns_to_shot_noise() {
        let dyn_ = PairDynamics::symmetric(0.8, 1.6, 0.0);
        let v0 = dyn_.output_covariance(0.0).unwrap().min_sum_variance();
        assert!(v0 < 0.05);
        // the four fixed-angle records relax as 1/omega^4
        let far = dyn_.output_covariance(100.0).unwrap();
        for v in [far.var_sum_x(), far.var_sum_p(), far.var_diff_x(), far.var_diff_p()] {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-6);
        }
        // the phase-optimized variance has a slower 4 alpha / omega^2 tail
        let v_opt = far.min_sum_variance();
        assert_abs_diff_eq!(v_opt, 1.0 - 4.0 * 0.8 / 1e4, epsilon = 3e-7);
    }

    #[test]
    fn above_threshold_is_reported_with_the_eigenvalue() {
        let dyn_ = drift_matrix(1.2, 2.4, 0.0, 2.0, 2.0).unwrap();
        match dyn_.output_covariance(0.0) {
            Err(LangevinError::Unstable { re, .. }) => assert!(re > 0.0),
            other => panic!("expected instability, got {other:?}"),
        }
    }

    #[test]
    fn pure_two_mode_squeezing_saturates_uncertainty() {
        let s = PairDynamics::symmetric(0.8, 1.6, 0.0).output_covariance(0.0).unwrap();
        assert_abs_diff_eq!(s.uncertainty_product(), 1.0, epsilon = 1e-9);
        assert!(s.min_eigenvalue() > -1e-12);
    }

    #[test]
    fn loss_asymmetry_changes_the_answer_only_slightly_when_small() {
        // the oracle exists to cover what the closed form cannot; sanity-check
        // that a mild loss asymmetry moves the variance smoothly
        let base = PairDynamics::symmetric(0.6, 1.2, 0.0)
            .output_covariance(0.0)
            .unwrap()
            .min_sum_variance();
        let skewed = drift_matrix(0.6, 1.2, 0.0, 2.0, 2.2)
            .unwrap()
            .output_covariance(0.0)
            .unwrap()
            .min_sum_variance();
        assert!((skewed - base).abs() < 0.05);
        assert!(skewed > base, "extra loss must cost squeezing");
    }

    #[test]
    fn stochastic_estimate_sees_vacuum() {
        let est = PairDynamics::symmetric(0.0, 0.0, 0.0)
            .stochastic_estimate(&StochasticConfig {
                duration: 2100.0,
                step: 0.01,
                window: 100.0,
                seed: 11,
            })
            .unwrap();
        assert!(
            (est.variance - 1.0).abs() < 3.0 * est.std_error,
            "vacuum run off by {} with se {}",
            est.variance - 1.0,
            est.std_error
        );
    }

    #[test]
    fn stochastic_estimate_matches_closed_form() {
        let est = PairDynamics::symmetric(0.8, 1.6, 0.0)
            .stochastic_estimate(&StochasticConfig::default())
            .unwrap();
        let target = squeezing::sum_quadrature_variance(0.8, 1.6, 0.0, 1.0).variance;
        assert!(
            (est.variance - target).abs() < 3.0 * est.std_error,
            "estimate {} +- {} vs {}",
            est.variance,
            est.std_error,
            target
        );
    }

    #[test]
    fn stochastic_estimate_is_bit_stable() {
        let cfg = StochasticConfig { duration: 2100.0, step: 0.02, window: 100.0, seed: 42 };
        let dyn_ = PairDynamics::symmetric(0.5, 1.0, 0.3).with_efficiencies(0.9, 0.9, 0.8).unwrap();
        let a = dyn_.stochastic_estimate(&cfg).unwrap();
        let b = dyn_.stochastic_estimate(&cfg).unwrap();
        assert_eq!(a.variance.to_bits(), b.variance.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    #[test]
    fn stochastic_preconditions_are_enforced() {
        let dyn_ = PairDynamics::symmetric(0.8, 1.6, 0.0);
        let coarse = StochasticConfig { step: 0.2, ..Default::default() };
        assert!(matches!(
            dyn_.stochastic_estimate(&coarse),
            Err(LangevinError::StepTooCoarse { .. })
        ));
        let short = StochasticConfig { duration: 150.0, ..Default::default() };
        assert!(matches!(
            dyn_.stochastic_estimate(&short),
            Err(LangevinError::DurationTooShort { .. })
        ));
    }

    #[test]
    fn derived_seeds_spread() {
        let s: Vec<u64> = (0..8).map(|i| derive_seed(7, i)).collect();
        for i in 0..s.len() {
            for j in 0..i {
                assert_ne!(s[i], s[j]);
            }
        }
    }
}
