//! TOML device files. On disk everything is in Hz (ordinary frequencies, the
//! way instruments report them); [`DeviceModel`] works in rad/s, so load and
//! save multiply by 2 pi at the boundary.
//!
//! ```toml
//! # resonator.toml
//! [target]
//! f0_hz = 194.3e12
//! fsr_hz = 100e9
//! d2_hz = 26.5e3
//! kappa_hz = 12.142e6
//!
//! [[crossing]]
//! g_hz = 9.4e6
//! kappa_c_hz = 607e3
//! fsr_mismatch_hz = 60.7e6   # crossing-family FSR minus target FSR
//! k0 = -23.965
//!
//! [eta_e]
//! default = 0.909
//! [[eta_e.override]]
//! k = 24
//! value = 0.88
//! ```

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::modes::{CrossingFamily, DeviceModel, EtaTable, ModeFamily};

#[derive(Debug, Error)]
pub enum DeviceFileError {
    #[error("cannot read device file: {0}")]
    Io(#[from] std::io::Error),
    #[error("device file is not valid TOML: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Invalid(#[from] crate::modes::ModeError),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetSection {
    f0_hz: f64,
    fsr_hz: f64,
    d2_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d3_hz: Option<f64>,
    kappa_hz: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CrossingSection {
    g_hz: f64,
    kappa_c_hz: f64,
    fsr_mismatch_hz: f64,
    k0: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EtaOverride {
    k: i32,
    value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EtaSection {
    default: f64,
    #[serde(default, rename = "override", skip_serializing_if = "Vec::is_empty")]
    overrides: Vec<EtaOverride>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawShiftSection {
    k: i32,
    shift_hz: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeviceFile {
    target: TargetSection,
    #[serde(default, rename = "crossing", skip_serializing_if = "Vec::is_empty")]
    crossings: Vec<CrossingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eta_e: Option<EtaSection>,
    #[serde(default, rename = "raw_shift", skip_serializing_if = "Vec::is_empty")]
    raw_shifts: Vec<RawShiftSection>,
}

pub fn parse_device(text: &str) -> Result<DeviceModel, DeviceFileError> {
    let file: DeviceFile = toml::from_str(text)?;
    let d1 = TAU * file.target.fsr_hz;
    let target = ModeFamily {
        omega0: TAU * file.target.f0_hz,
        d1,
        d2: TAU * file.target.d2_hz,
        d3: TAU * file.target.d3_hz.unwrap_or(0.0),
        kappa: TAU * file.target.kappa_hz,
    };
    let crossings = file
        .crossings
        .iter()
        .map(|c| CrossingFamily {
            g: TAU * c.g_hz,
            kappa_c: TAU * c.kappa_c_hz,
            d1_c: d1 + TAU * c.fsr_mismatch_hz,
            k0: c.k0,
        })
        .collect();
    let eta_e = match file.eta_e {
        Some(section) => EtaTable {
            default: section.default,
            overrides: section.overrides.iter().map(|o| (o.k, o.value)).collect(),
        },
        None => EtaTable::default(),
    };
    let raw_shifts: BTreeMap<i32, f64> = file
        .raw_shifts
        .iter()
        .map(|s| (s.k, TAU * s.shift_hz))
        .collect();
    let device = DeviceModel { target, crossings, eta_e, raw_shifts };
    device.validate()?;
    Ok(device)
}

pub fn load_device(path: &Path) -> Result<DeviceModel, DeviceFileError> {
    parse_device(&std::fs::read_to_string(path)?)
}

/// Serialize a model back to the file schema. Round trips with
/// [`parse_device`] up to floating-point division by 2 pi.
pub fn device_to_toml(device: &DeviceModel) -> String {
    let d1_hz = device.target.d1 / TAU;
    let file = DeviceFile {
        target: TargetSection {
            f0_hz: device.target.omega0 / TAU,
            fsr_hz: d1_hz,
            d2_hz: device.target.d2 / TAU,
            d3_hz: (device.target.d3 != 0.0).then_some(device.target.d3 / TAU),
            kappa_hz: device.target.kappa / TAU,
        },
        crossings: device
            .crossings
            .iter()
            .map(|c| CrossingSection {
                g_hz: c.g / TAU,
                kappa_c_hz: c.kappa_c / TAU,
                fsr_mismatch_hz: c.d1_c / TAU - d1_hz,
                k0: c.k0,
            })
            .collect(),
        eta_e: Some(EtaSection {
            default: device.eta_e.default,
            overrides: device
                .eta_e
                .overrides
                .iter()
                .map(|(&k, &value)| EtaOverride { k, value })
                .collect(),
        }),
        raw_shifts: device
            .raw_shifts
            .iter()
            .map(|(&k, &shift)| RawShiftSection { k, shift_hz: shift / TAU })
            .collect(),
    };
    let mut out = String::new();
    let _ = write!(out, "{}", toml::to_string_pretty(&file).expect("schema is serializable"));
    out
}

pub fn save_device(device: &DeviceModel, path: &Path) -> Result<(), DeviceFileError> {
    std::fs::write(path, device_to_toml(device))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const EXAMPLE: &str = r#"
        [target]
        f0_hz = 194.3e12
        fsr_hz = 100e9
        d2_hz = 26.5e3
        kappa_hz = 12.142e6

        [[crossing]]
        g_hz = 9.404e6
        kappa_c_hz = 607.1e3
        fsr_mismatch_hz = 60.71e6
        k0 = -23.965

        [eta_e]
        default = 0.909
        [[eta_e.override]]
        k = 24
        value = 0.88

        [[raw_shift]]
        k = 31
        shift_hz = 1.5e6
    "#;

    #[test]
    fn loads_the_documented_example() {
        let dev = parse_device(EXAMPLE).unwrap();
        assert_abs_diff_eq!(dev.target.d2, TAU * 26.5e3);
        assert_abs_diff_eq!(dev.target.kappa, TAU * 12.142e6);
        assert_eq!(dev.crossings.len(), 1);
        assert_abs_diff_eq!(dev.crossings[0].d1_c - dev.target.d1, TAU * 60.71e6, epsilon = 1.0);
        assert_abs_diff_eq!(dev.eta_e.get(24), 0.88);
        assert_abs_diff_eq!(dev.eta_e.get(-24), 0.909);
        assert_abs_diff_eq!(dev.raw_shifts[&31], TAU * 1.5e6);
    }

    #[test]
    fn minimal_file_defaults_everything_optional() {
        let dev = parse_device(
            "[target]\nf0_hz = 1.0\nfsr_hz = 1.0\nd2_hz = 0.1\nkappa_hz = 1.0\n",
        )
        .unwrap();
        assert!(dev.crossings.is_empty());
        assert_eq!(dev.eta_e.get(7), 1.0);
        assert!(dev.raw_shifts.is_empty());
        assert_eq!(dev.target.d3, 0.0);
    }

    #[test]
    fn round_trips_through_serialization() {
        let dev = parse_device(EXAMPLE).unwrap();
        let back = parse_device(&device_to_toml(&dev)).unwrap();
        assert_abs_diff_eq!(back.target.d2, dev.target.d2, epsilon = 1e-9);
        assert_abs_diff_eq!(
            back.crossings[0].d1_c - back.target.d1,
            dev.crossings[0].d1_c - dev.target.d1,
            epsilon = 1e-3
        );
        assert_eq!(back.eta_e.overrides, dev.eta_e.overrides);
        assert_eq!(back.raw_shifts.len(), dev.raw_shifts.len());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_physics() {
        let unknown = "[target]\nf0_hz = 1.0\nfsr_hz = 1.0\nd2_hz = 0.1\nkappa_hz = 1.0\nbogus = 3\n";
        assert!(matches!(parse_device(unknown), Err(DeviceFileError::Toml(_))));

        let negative_kappa =
            "[target]\nf0_hz = 1.0\nfsr_hz = 1.0\nd2_hz = 0.1\nkappa_hz = -1.0\n";
        assert!(matches!(parse_device(negative_kappa), Err(DeviceFileError::Invalid(_))));

        let bad_eta = "[target]\nf0_hz = 1.0\nfsr_hz = 1.0\nd2_hz = 0.1\nkappa_hz = 1.0\n[eta_e]\ndefault = 1.5\n";
        assert!(matches!(parse_device(bad_eta), Err(DeviceFileError::Invalid(_))));
    }

    #[test]
    fn save_and_load_through_a_file() {
        let dir = std::env::temp_dir().join("cvcomb-device-file-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("dev.toml");
        let dev = parse_device(EXAMPLE).unwrap();
        save_device(&dev, &path).unwrap();
        let back = load_device(&path).unwrap();
        assert_abs_diff_eq!(back.target.kappa, dev.target.kappa, epsilon = 1e-6);
        std::fs::remove_dir_all(&dir).ok();
    }
}
