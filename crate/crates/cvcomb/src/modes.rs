//! Resonator mode structure: integrated dispersion of the pumped family,
//! frequency/loss perturbations from avoided mode crossings (AMX), and the
//! per-pair detunings that feed the squeezing formulas.
//!
//! Inputs here are in rad/s; [`pair_detunings`] is the boundary where
//! everything becomes dimensionless (normalized by kappa/2 of the target
//! family). Downstream modules never see another unit conversion.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModeError {
    #[error("mode family needs a positive free spectral range, got d1 = {0}")]
    NonpositiveFsr(f64),
    #[error("mode family needs a positive loss rate, got kappa = {0}")]
    NonpositiveLoss(f64),
    #[error("crossing family needs a positive loss rate, got kappa_c = {0}")]
    NonpositiveCrossingLoss(f64),
    #[error("crossing coupling must be nonnegative, got g = {0}")]
    NegativeCoupling(f64),
    #[error("extraction efficiency must lie in [0, 1], got {value}{}", .k.map(|k| format!(" at k = {k}")).unwrap_or_default())]
    BadEfficiency { value: f64, k: Option<i32> },
    #[error("pair index must be a positive integer (k and -k form the pair; k = 0 is the pump mode), got {0}")]
    NotAPairIndex(i32),
}

/// One comb mode family. `omega0` is the absolute frequency of mode k = 0,
/// `d1` the free spectral range, `d2`/`d3` the dispersion coefficients in
/// omega_k = omega0 + k d1 + k^2 d2/2 + k^3 d3/6, and `kappa` the total loss
/// rate. All rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeFamily {
    pub omega0: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub kappa: f64,
}

impl ModeFamily {
    pub fn validate(&self) -> Result<(), ModeError> {
        if self.d1 <= 0.0 || self.d1.is_nan() {
            return Err(ModeError::NonpositiveFsr(self.d1));
        }
        if self.kappa <= 0.0 || self.kappa.is_nan() {
            return Err(ModeError::NonpositiveLoss(self.kappa));
        }
        Ok(())
    }

    pub fn half_kappa(&self) -> f64 {
        self.kappa / 2.0
    }
}

/// A second mode family whose dispersion intersects the target family near
/// mode index `k0` (fractional: real crossings rarely sit on the grid).
/// `g` is the linear coupling to the target family, `kappa_c` the crossing
/// family's total loss, `d1_c` its free spectral range. All rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingFamily {
    pub g: f64,
    pub kappa_c: f64,
    pub d1_c: f64,
    pub k0: f64,
}

impl CrossingFamily {
    pub fn validate(&self) -> Result<(), ModeError> {
        if self.kappa_c <= 0.0 || self.kappa_c.is_nan() {
            return Err(ModeError::NonpositiveCrossingLoss(self.kappa_c));
        }
        if self.g < 0.0 || self.g.is_nan() {
            return Err(ModeError::NegativeCoupling(self.g));
        }
        Ok(())
    }
}

/// Per-mode extraction efficiency kappa_e/kappa: a constant default plus
/// sparse per-index overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaTable {
    pub default: f64,
    pub overrides: BTreeMap<i32, f64>,
}

impl EtaTable {
    pub fn uniform(value: f64) -> Self {
        EtaTable { default: value, overrides: BTreeMap::new() }
    }

    pub fn get(&self, k: i32) -> f64 {
        self.overrides.get(&k).copied().unwrap_or(self.default)
    }

    pub fn validate(&self) -> Result<(), ModeError> {
        if !(0.0..=1.0).contains(&self.default) {
            return Err(ModeError::BadEfficiency { value: self.default, k: None });
        }
        for (&k, &v) in &self.overrides {
            if !(0.0..=1.0).contains(&v) {
                return Err(ModeError::BadEfficiency { value: v, k: Some(k) });
            }
        }
        Ok(())
    }
}

impl Default for EtaTable {
    fn default() -> Self {
        EtaTable::uniform(1.0)
    }
}

/// Complete device description: target family, crossing families, extraction
/// table, plus raw per-mode frequency offsets (rad/s) for measured features
/// that no crossing model was fitted to. Crossing perturbations superpose
/// linearly; that is exact for one crossing and an approximation for several.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceModel {
    pub target: ModeFamily,
    pub crossings: Vec<CrossingFamily>,
    pub eta_e: EtaTable,
    pub raw_shifts: BTreeMap<i32, f64>,
}

impl DeviceModel {
    pub fn new(target: ModeFamily) -> Self {
        DeviceModel {
            target,
            crossings: Vec::new(),
            eta_e: EtaTable::default(),
            raw_shifts: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<(), ModeError> {
        self.target.validate()?;
        for c in &self.crossings {
            c.validate()?;
        }
        self.eta_e.validate()
    }
}

/// Detunings of the pair (k, -k) in units of kappa/2: `zeta_bar` is the
/// average, `delta` the asymmetric half-difference, and `dkappa_*` the
/// AMX-induced loss additions of each member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairDetuning {
    pub k: i32,
    pub zeta_bar: f64,
    pub delta: f64,
    pub dkappa_plus: f64,
    pub dkappa_minus: f64,
}

/// Frequency/loss perturbation a crossing family imprints on one target mode,
/// with the dimensionless hybridization weight `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmxShift {
    pub delta_omega: f64,
    pub delta_kappa: f64,
    pub beta: f64,
}

/// D_int(k) = d2 k^2/2 + d3 k^3/6, the mode frequency relative to the
/// equidistant grid omega0 + k d1.
pub fn integrated_dispersion(family: &ModeFamily, k: i32) -> f64 {
    let kf = f64::from(k);
    family.d2 * kf * kf / 2.0 + family.d3 * kf * kf * kf / 6.0
}

/// Detuning between the crossing family and target mode k: the two walk off
/// linearly with their FSR difference away from the intersection at k0.
/// `delta_omega0` is the frequency reference offset at k = k0 (the pump
/// detuning when evaluating a driven device, zero for a cold scan).
pub fn crossing_detuning(
    c: &CrossingFamily,
    target: &ModeFamily,
    k: i32,
    delta_omega0: f64,
) -> f64 {
    delta_omega0 + (f64::from(k) - c.k0) * (c.d1_c - target.d1)
}

/// Frequency and loss perturbation from adiabatic elimination of the crossing
/// mode at detuning `delta_c`. The Lorentzian weight
/// beta = g^2 / ((kappa_c/2)^2 + delta_c^2) pushes the target mode away
/// (delta_omega = -beta delta_c) and adds loss (delta_kappa = beta kappa_c);
/// both vanish for kappa_c >> 2 g.
pub fn amx_perturbation(c: &CrossingFamily, delta_c: f64) -> AmxShift {
    let hw = c.kappa_c / 2.0;
    let beta = c.g * c.g / (hw * hw + delta_c * delta_c);
    AmxShift {
        delta_omega: -beta * delta_c,
        delta_kappa: beta * c.kappa_c,
        beta,
    }
}

/// Normalized detunings of the pair (k, -k) for pump detuning `zeta0`
/// (in units of kappa/2). Sums dispersion, every crossing family's shift, and
/// any raw per-mode offsets; crossing detunings are referenced to the pumped
/// frame, so the crossing offset at k0 equals zeta0 * kappa/2.
pub fn pair_detunings(dev: &DeviceModel, k: i32, zeta0: f64) -> Result<PairDetuning, ModeError> {
    if k < 1 {
        return Err(ModeError::NotAPairIndex(k));
    }
    let hk = dev.target.half_kappa();
    let delta_omega0 = zeta0 * hk;
    let one_mode = |idx: i32| -> (f64, f64) {
        let mut dw = integrated_dispersion(&dev.target, idx);
        let mut dk = 0.0;
        for c in &dev.crossings {
            let shift = amx_perturbation(c, crossing_detuning(c, &dev.target, idx, delta_omega0));
            dw += shift.delta_omega;
            dk += shift.delta_kappa;
        }
        if let Some(extra) = dev.raw_shifts.get(&idx) {
            dw += extra;
        }
        (zeta0 + dw / hk, dk / hk)
    };
    let (zeta_p, dk_p) = one_mode(k);
    let (zeta_m, dk_m) = one_mode(-k);
    Ok(PairDetuning {
        k,
        zeta_bar: (zeta_p + zeta_m) / 2.0,
        delta: (zeta_p - zeta_m) / 2.0,
        dkappa_plus: dk_p,
        dkappa_minus: dk_m,
    })
}
