//! Toolkit for designing and verifying two-mode-squeezed EPR pairs in Kerr
//! microresonator combs.
//!
//! The crate predicts the sum-quadrature squeezing of every frequency pair
//! (k, -k) of a pumped resonator from its mode structure (dispersion plus
//! avoided mode crossings), cross-checks the closed form against an
//! independent quantum-Langevin covariance oracle, plans pump detuning for
//! maximal uniform-squeezing bandwidth, and fits measured dispersion scans
//! back into a device description.
//!
//! Internally all dynamics are dimensionless: frequencies and rates are
//! normalized by half the target family's linewidth (kappa/2). The
//! [`modes`] and [`device_file`] modules own every unit conversion.

pub mod calibration;
pub mod device_file;
pub mod dispersion;
pub mod langevin;
pub mod modes;
pub mod planner;
pub mod squeezing;
pub mod verify;
