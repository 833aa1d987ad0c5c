//! Measured integrated-dispersion analysis: parse a scan, fit the smooth
//! dispersion background, flag crossing-perturbed modes, report clean
//! windows, and fit each flagged cluster back to a crossing family so the
//! measurement can drive the forward model.
//!
//! Scans are (k, D_int) samples in Hz. A crossing shows up in the residuals
//! as the dispersive Lorentzian r(k) = -a m / (w^2 + m^2) with m = k - k0.
//! Only (a, w, k0) are identifiable from one scan: with s the FSR mismatch
//! of the crossing family, a = g^2/s and w = kappa_c/(2 s). Callers who know
//! s get (g, kappa_c) back exactly; otherwise a documented one-linewidth-
//! per-mode gauge is used and marked as such.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::modes::{CrossingFamily, DeviceModel, EtaTable, ModeFamily};

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("cannot read scan: {0}")]
    Io(#[from] std::io::Error),
    #[error("scan has no data rows")]
    Empty,
    #[error("line {line}: expected header 'k,dint_hz', found '{found}'")]
    Header { line: usize, found: String },
    #[error("line {line}: expected two comma-separated fields, found {nfields}")]
    FieldCount { line: usize, nfields: usize },
    #[error("line {line}: cannot parse '{text}' as {what}")]
    Number { line: usize, text: String, what: &'static str },
    #[error("line {line}: duplicate mode index k = {k}")]
    DuplicateIndex { line: usize, k: i32 },
    #[error("line {line}: unknown metadata key '{key}'")]
    Metadata { line: usize, key: String },
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("need at least {need} samples for a degree-{degree} background fit, got {got}")]
    TooFewPoints { need: usize, degree: u8, got: usize },
    #[error("robust rejection left only {left} points, not enough to constrain the fit")]
    Degenerate { left: usize },
    #[error("background degree must be 2 or 3, got {0}")]
    BadDegree(u8),
    #[error("scan carries no linewidth; supply kappa_hz (metadata line '# kappa_hz = ...' or an explicit argument) to convert residuals to linewidths")]
    MissingLinewidth,
    #[error("run the crossing detector first: the fit report carries no flag set")]
    NotDetected,
    #[error("fsr mismatch sign ({mismatch} Hz/mode) contradicts the fitted crossing amplitude ({amplitude} Hz mode); the crossing approaches from the other side")]
    MismatchSign { mismatch: f64, amplitude: f64 },
    #[error(transparent)]
    Modes(#[from] crate::modes::ModeError),
}

/// A dispersion scan: per-mode integrated dispersion in Hz, sorted by k.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionScan {
    pub samples: Vec<(i32, f64)>,
    pub reference_wavelength_nm: Option<f64>,
    pub kappa_hz: Option<f64>,
}

/// Background-fit configuration. `degree` is 2 or 3; the constant and linear
/// terms are absent by the definition of D_int unless `include_linear` asks
/// for a nuisance linear term. Robust mode iterates MAD-based exclusion.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub degree: u8,
    pub robust: bool,
    pub mad_c: f64,
    pub include_linear: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { degree: 2, robust: true, mad_c: 5.0, include_linear: false }
    }
}

/// Background fit plus (after [`detect_amx`]) the flag set and clean windows.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub d2_fit_hz: f64,
    pub d3_fit_hz: Option<f64>,
    pub d1_fit_hz: Option<f64>,
    /// Residual per sample, same order as the scan.
    pub residuals_hz: Vec<f64>,
    /// Points the robust loop excluded from the background fit.
    pub excluded: Vec<i32>,
    /// Modes flagged as crossing-perturbed; empty until detection ran.
    pub flagged: Vec<i32>,
    /// Maximal runs of consecutive unflagged k, inclusive bounds.
    pub windows: Vec<(i32, i32)>,
    detected: bool,
}

/// Identifiable parameters of one fitted crossing, before gauge resolution.
#[derive(Debug, Clone, Copy)]
pub struct CrossingRecovery {
    /// Amplitude a of r(k) = -a m / (w^2 + m^2), Hz * mode.
    pub amplitude_hz: f64,
    /// Half-width w in modes.
    pub width_modes: f64,
    pub k0: f64,
    /// Cluster of flagged modes this was fitted to, inclusive.
    pub cluster: (i32, i32),
    /// Number of samples the fit used (cluster plus margins).
    pub points: usize,
    /// True when kappa_c/g came from the fallback gauge rather than a known
    /// FSR mismatch.
    pub gauge: bool,
}

/// Result of promoting a scan to a device model.
#[derive(Debug, Clone)]
pub struct DeviceFit {
    pub device: DeviceModel,
    pub crossings: Vec<CrossingRecovery>,
    /// Flagged clusters too small to fit; carried as raw shifts instead.
    pub unfit_clusters: Vec<(i32, i32)>,
    /// Background curvature after crossing subtraction, Hz.
    pub refined_d2_hz: f64,
}

/// Options for [`to_device_model`].
#[derive(Debug, Clone, Copy, Default)]
pub struct DeviceBuildOptions {
    /// Known FSR mismatch s = D1_c - D1_t in Hz per mode; resolves the
    /// (g, kappa_c) gauge exactly.
    pub fsr_mismatch_hz: Option<f64>,
    /// Target-family FSR in Hz for the device file; only the crossing
    /// mismatch relative to it matters downstream, so absent means a 1 Hz
    /// placeholder.
    pub fsr_hz: Option<f64>,
    /// Uniform extraction efficiency for the table (default 1).
    pub eta_e: Option<f64>,
}

pub fn load_scan(path: &Path) -> Result<DispersionScan, ScanError> {
    parse_scan(&std::fs::read_to_string(path)?)
}

/// Parse scan text: optional `# key = value` metadata lines (kappa_hz,
/// reference_wavelength_nm), a mandatory `k,dint_hz` header, then data rows.
/// Errors carry 1-based line numbers.
pub fn parse_scan(text: &str) -> Result<DispersionScan, ScanError> {
    let mut scan = DispersionScan {
        samples: Vec::new(),
        reference_wavelength_nm: None,
        kappa_hz: None,
    };
    let mut seen = BTreeMap::new();
    let mut header_done = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(meta) = trimmed.strip_prefix('#') {
            if let Some((key, value)) = meta.split_once(['=', ':']) {
                let key = key.trim();
                let value = value.trim();
                let parsed = value.parse::<f64>().map_err(|_| ScanError::Number {
                    line,
                    text: value.to_string(),
                    what: "a metadata number",
                })?;
                match key {
                    "kappa_hz" => scan.kappa_hz = Some(parsed),
                    "reference_wavelength_nm" => scan.reference_wavelength_nm = Some(parsed),
                    other => {
                        return Err(ScanError::Metadata { line, key: other.to_string() })
                    }
                }
            }
            continue;
        }
        if !header_done {
            let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if fields != ["k", "dint_hz"] {
                return Err(ScanError::Header { line, found: trimmed.to_string() });
            }
            header_done = true;
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(ScanError::FieldCount { line, nfields: fields.len() });
        }
        let k: i32 = fields[0].parse().map_err(|_| ScanError::Number {
            line,
            text: fields[0].to_string(),
            what: "a mode index",
        })?;
        let dint: f64 = fields[1].parse().map_err(|_| ScanError::Number {
            line,
            text: fields[1].to_string(),
            what: "a frequency in Hz",
        })?;
        if let Some(&first) = seen.get(&k) {
            let _ = first;
            return Err(ScanError::DuplicateIndex { line, k });
        }
        seen.insert(k, line);
        scan.samples.push((k, dint));
    }
    if !header_done && scan.samples.is_empty() {
        return Err(ScanError::Empty);
    }
    if scan.samples.is_empty() {
        return Err(ScanError::Empty);
    }
    scan.samples.sort_by_key(|&(k, _)| k);
    Ok(scan)
}

/// Serialize a scan back to the documented text form.
pub fn scan_to_csv(scan: &DispersionScan) -> String {
    let mut out = String::new();
    if let Some(kappa) = scan.kappa_hz {
        let _ = writeln!(out, "# kappa_hz = {kappa}");
    }
    if let Some(wl) = scan.reference_wavelength_nm {
        let _ = writeln!(out, "# reference_wavelength_nm = {wl}");
    }
    out.push_str("k,dint_hz\n");
    for &(k, d) in &scan.samples {
        let _ = writeln!(out, "{k},{d}");
    }
    out
}

fn basis(k: f64, opts: &FitOptions) -> Vec<f64> {
    let mut row = Vec::with_capacity(3);
    if opts.include_linear {
        row.push(k);
    }
    row.push(k * k / 2.0);
    if opts.degree == 3 {
        row.push(k * k * k / 6.0);
    }
    row
}

fn solve_ls(
    scan: &DispersionScan,
    mask: &[bool],
    opts: &FitOptions,
) -> Result<Vec<f64>, FitError> {
    let cols = basis(0.0, opts).len();
    let rows: Vec<usize> = (0..scan.samples.len()).filter(|&i| mask[i]).collect();
    if rows.len() < cols + 1 {
        return Err(FitError::Degenerate { left: rows.len() });
    }
    let a = DMatrix::from_fn(rows.len(), cols, |r, c| {
        basis(f64::from(scan.samples[rows[r]].0), opts)[c]
    });
    let y = DMatrix::from_fn(rows.len(), 1, |r, _| scan.samples[rows[r]].1);
    let svd = a.svd(true, true);
    let sol = svd.solve(&y, 1e-14).map_err(|_| FitError::Degenerate { left: rows.len() })?;
    Ok(sol.column(0).iter().copied().collect())
}

fn model_value(coeffs: &[f64], k: f64, opts: &FitOptions) -> f64 {
    basis(k, opts).iter().zip(coeffs).map(|(b, c)| b * c).sum()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Least-squares polynomial background in the D_int basis (k^2/2, optionally
/// k^3/6 and a nuisance linear term). Robust mode iterates: fit, take the
/// median absolute deviation of the residuals, drop points with
/// |residual| > mad_c * MAD, refit, to a fixed point (at most 20 rounds).
/// Perfectly clean data would drive MAD to zero and flag everything, so a
/// floor at 1e-9 of the data scale stops exclusion instead.
pub fn fit_background(scan: &DispersionScan, opts: &FitOptions) -> Result<FitReport, FitError> {
    if opts.degree != 2 && opts.degree != 3 {
        return Err(FitError::BadDegree(opts.degree));
    }
    let need = usize::from(opts.degree) + 2;
    if scan.samples.len() < need {
        return Err(FitError::TooFewPoints {
            need,
            degree: opts.degree,
            got: scan.samples.len(),
        });
    }
    let n = scan.samples.len();
    let mut mask = vec![true; n];
    let mut coeffs = solve_ls(scan, &mask, opts)?;
    let scale = scan.samples.iter().map(|&(_, y)| y.abs()).fold(1.0, f64::max);
    if opts.robust {
        for _ in 0..20 {
            let resid: Vec<f64> = scan
                .samples
                .iter()
                .map(|&(k, y)| y - model_value(&coeffs, f64::from(k), opts))
                .collect();
            let med = median(&mut resid.clone());
            let mad = median(&mut resid.iter().map(|r| (r - med).abs()).collect::<Vec<_>>());
            if mad < 1e-9 * scale {
                break;
            }
            let new_mask: Vec<bool> =
                resid.iter().map(|r| r.abs() <= opts.mad_c * mad).collect();
            if new_mask == mask {
                break;
            }
            mask = new_mask;
            coeffs = solve_ls(scan, &mask, opts)?;
        }
    }
    let residuals_hz: Vec<f64> = scan
        .samples
        .iter()
        .map(|&(k, y)| y - model_value(&coeffs, f64::from(k), opts))
        .collect();
    let mut iter = coeffs.iter().copied();
    let d1_fit_hz = opts.include_linear.then(|| iter.next().unwrap());
    let d2_fit_hz = iter.next().unwrap();
    let d3_fit_hz = (opts.degree == 3).then(|| iter.next().unwrap());
    Ok(FitReport {
        d2_fit_hz,
        d3_fit_hz,
        d1_fit_hz,
        residuals_hz,
        excluded: scan
            .samples
            .iter()
            .zip(&mask)
            .filter(|(_, &m)| !m)
            .map(|(&(k, _), _)| k)
            .collect(),
        flagged: Vec::new(),
        windows: Vec::new(),
        detected: false,
    })
}

/// Flag modes whose residual exceeds `threshold_linewidths` half-linewidths
/// and compute the maximal unflagged runs of consecutive k. Needs the scan's
/// linewidth metadata.
pub fn detect_amx(
    scan: &DispersionScan,
    fit: &FitReport,
    threshold_linewidths: f64,
) -> Result<FitReport, FitError> {
    let kappa = scan.kappa_hz.ok_or(FitError::MissingLinewidth)?;
    let mut out = fit.clone();
    let cut = threshold_linewidths * kappa / 2.0;
    out.flagged = scan
        .samples
        .iter()
        .zip(&fit.residuals_hz)
        .filter(|(_, r)| r.abs() > cut)
        .map(|(&(k, _), _)| k)
        .collect();
    out.windows = Vec::new();
    let mut current: Option<(i32, i32)> = None;
    let mut prev_k: Option<i32> = None;
    for (&(k, _), r) in scan.samples.iter().zip(&fit.residuals_hz) {
        let gap = prev_k.is_some_and(|p| k != p + 1);
        let flagged = r.abs() > cut;
        if gap {
            if let Some(w) = current.take() {
                out.windows.push(w);
            }
        }
        if flagged {
            if let Some(w) = current.take() {
                out.windows.push(w);
            }
        } else {
            current = Some(match current {
                Some((lo, _)) => (lo, k),
                None => (k, k),
            });
        }
        prev_k = Some(k);
    }
    if let Some(w) = current {
        out.windows.push(w);
    }
    out.detected = true;
    Ok(out)
}

/// Dispersive Lorentzian residual profile of a crossing.
fn lorentzian(a: f64, w: f64, k0: f64, k: f64) -> f64 {
    let m = k - k0;
    -a * m / (w * w + m * m)
}

/// Derivative-free Nelder-Mead minimizer, small and deterministic. Converges
/// when the simplex diameter shrinks below tol relative to the best vertex
/// (parameters well past 1e-8 for these smooth objectives).
fn nelder_mead<F: Fn(&[f64; 3]) -> f64>(
    f: F,
    x0: [f64; 3],
    scale: [f64; 3],
    tol: f64,
    itmax: usize,
) -> ([f64; 3], f64) {
    let mut simplex: Vec<[f64; 3]> = vec![x0];
    for i in 0..3 {
        let mut x = x0;
        x[i] += scale[i];
        simplex.push(x);
    }
    let mut fv: Vec<f64> = simplex.iter().map(&f).collect();
    let add = |a: &[f64; 3], b: &[f64; 3], s: f64| -> [f64; 3] {
        [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
    };
    for _ in 0..itmax {
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&i, &j| fv[i].total_cmp(&fv[j]));
        simplex = order.iter().map(|&i| simplex[i]).collect();
        fv = order.iter().map(|&i| fv[i]).collect();

        let best_mag = simplex[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diam = simplex[1..]
            .iter()
            .map(|x| {
                x.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max)
            })
            .fold(0.0f64, f64::max);
        if diam < tol * (1.0 + best_mag) {
            break;
        }

        let mut centroid = [0.0f64; 3];
        for x in &simplex[..3] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / 3.0;
            }
        }
        let worst = simplex[3];
        let reflected = add(&centroid, &add(&centroid, &worst, -1.0), 1.0);
        let fr = f(&reflected);
        if fr < fv[0] {
            let expanded = add(&centroid, &add(&centroid, &worst, -1.0), 2.0);
            let fe = f(&expanded);
            if fe < fr {
                simplex[3] = expanded;
                fv[3] = fe;
            } else {
                simplex[3] = reflected;
                fv[3] = fr;
            }
        } else if fr < fv[2] {
            simplex[3] = reflected;
            fv[3] = fr;
        } else {
            let contracted = add(&worst, &add(&centroid, &worst, -1.0), 0.5);
            let fc = f(&contracted);
            if fc < fv[3] {
                simplex[3] = contracted;
                fv[3] = fc;
            } else {
                for i in 1..4 {
                    simplex[i] = add(&simplex[0], &add(&simplex[i], &simplex[0], -1.0), 0.5);
                    fv[i] = f(&simplex[i]);
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..4 {
        if fv[i] < fv[best] {
            best = i;
        }
    }
    (simplex[best], fv[best])
}

/// Least-squares fit of the dispersive Lorentzian to the residuals of one
/// flagged cluster (plus two margin modes each side). Seeds k0 from the
/// magnitude-weighted centroid and tries both amplitude signs.
fn fit_crossing(
    scan: &DispersionScan,
    residuals: &[f64],
    cluster: (i32, i32),
) -> (f64, f64, f64, usize) {
    let (lo, hi) = cluster;
    let pts: Vec<(f64, f64)> = scan
        .samples
        .iter()
        .zip(residuals)
        .filter(|(&(k, _), _)| k >= lo - 2 && k <= hi + 2)
        .map(|(&(k, _), &r)| (f64::from(k), r))
        .collect();
    let obj = |p: &[f64; 3]| -> f64 {
        pts.iter()
            .map(|&(k, r)| {
                let e = r - lorentzian(p[0], p[1].abs(), p[2], k);
                e * e
            })
            .sum()
    };
    let wsum: f64 = pts.iter().map(|&(_, r)| r.abs()).sum();
    let k0_seed = if wsum > 0.0 {
        pts.iter().map(|&(k, r)| k * r.abs()).sum::<f64>() / wsum
    } else {
        (f64::from(lo) + f64::from(hi)) / 2.0
    };
    let w_seed = (f64::from(hi - lo) / 4.0).max(0.5);
    let peak = pts.iter().map(|&(_, r)| r.abs()).fold(0.0f64, f64::max);
    let a_seed = 2.0 * w_seed * peak;
    let mut best: Option<([f64; 3], f64)> = None;
    for sign in [1.0, -1.0] {
        let (x, v) = nelder_mead(
            obj,
            [sign * a_seed, w_seed, k0_seed],
            [0.3 * a_seed, 0.3 * w_seed, 0.5],
            1e-10,
            4000,
        );
        if best.as_ref().is_none_or(|(_, bv)| v < *bv) {
            best = Some((x, v));
        }
    }
    let (x, _) = best.expect("two starts were tried");
    (x[0], x[1].abs(), x[2], pts.len())
}

/// Group flagged modes into clusters, merging runs separated by at most two
/// unflagged modes (a crossing's wings can dip under threshold in between).
fn clusters(flagged: &[i32]) -> Vec<(i32, i32)> {
    let mut out: Vec<(i32, i32)> = Vec::new();
    for &k in flagged {
        match out.last_mut() {
            Some((_, hi)) if k - *hi <= 3 => *hi = k,
            _ => out.push((k, k)),
        }
    }
    out
}

/// Promote a detected fit to a [`DeviceModel`].
///
/// Two passes keep the Lorentzian wings from biasing the curvature: fit each
/// flagged cluster on the robust-fit residuals, subtract the fitted crossings
/// from the data, refit the background on everything, then refit the
/// crossings against the refined residuals. Clusters with fewer than three
/// flagged modes cannot constrain the three-parameter profile and are carried
/// as raw per-mode shifts instead.
pub fn to_device_model(
    scan: &DispersionScan,
    fit: &FitReport,
    kappa_hz: f64,
    opts: &DeviceBuildOptions,
) -> Result<DeviceFit, FitError> {
    if !fit.detected {
        return Err(FitError::NotDetected);
    }
    let fit_opts = FitOptions {
        degree: if fit.d3_fit_hz.is_some() { 3 } else { 2 },
        robust: true,
        mad_c: 5.0,
        include_linear: fit.d1_fit_hz.is_some(),
    };
    let all_clusters = clusters(&fit.flagged);
    let (fittable, unfit): (Vec<_>, Vec<_>) = all_clusters
        .iter()
        .copied()
        .partition(|&(lo, hi)| fit.flagged.iter().filter(|&&k| k >= lo && k <= hi).count() >= 3);

    // pass 1: crossings against the robust-fit residuals
    let pass1: Vec<(f64, f64, f64, usize)> = fittable
        .iter()
        .map(|&cl| fit_crossing(scan, &fit.residuals_hz, cl))
        .collect();

    // subtract, refit background, rebuild residuals against the original data
    let mut cleaned = scan.clone();
    for (k_y, &(k, _)) in cleaned.samples.iter_mut().zip(&scan.samples) {
        let mut y = k_y.1;
        for &(a, w, k0, _) in &pass1 {
            y -= lorentzian(a, w, k0, f64::from(k));
        }
        *k_y = (k, y);
    }
    let refit = fit_background(&cleaned, &fit_opts)?;
    let residuals2: Vec<f64> = scan
        .samples
        .iter()
        .map(|&(k, y)| {
            let mut coeffs = Vec::new();
            if let Some(d1) = refit.d1_fit_hz {
                coeffs.push(d1);
            }
            coeffs.push(refit.d2_fit_hz);
            if let Some(d3) = refit.d3_fit_hz {
                coeffs.push(d3);
            }
            y - model_value(&coeffs, f64::from(k), &fit_opts)
        })
        .collect();

    // pass 2: final crossing parameters against the refined residuals
    let mut recoveries = Vec::new();
    let mut crossings = Vec::new();
    let d1 = TAU * opts.fsr_hz.unwrap_or(1.0);
    for &cl in &fittable {
        let (a, w, k0, points) = fit_crossing(scan, &residuals2, cl);
        let (s_hz, gauge) = match opts.fsr_mismatch_hz {
            Some(s) => {
                if s * a < 0.0 {
                    return Err(FitError::MismatchSign { mismatch: s, amplitude: a });
                }
                (s, false)
            }
            // gauge: one target linewidth of walk-off per mode, signed like a
            None => (kappa_hz.copysign(a), true),
        };
        let g_hz = (a * s_hz).sqrt();
        let kappa_c_hz = 2.0 * w * s_hz.abs();
        recoveries.push(CrossingRecovery {
            amplitude_hz: a,
            width_modes: w,
            k0,
            cluster: cl,
            points,
            gauge,
        });
        crossings.push(CrossingFamily {
            g: TAU * g_hz,
            kappa_c: TAU * kappa_c_hz,
            d1_c: d1 + TAU * s_hz,
            k0,
        });
    }

    let mut raw_shifts = BTreeMap::new();
    for &(lo, hi) in &unfit {
        for (&(k, _), &r) in scan.samples.iter().zip(&residuals2) {
            if k >= lo && k <= hi && fit.flagged.contains(&k) {
                raw_shifts.insert(k, TAU * r);
            }
        }
    }

    let omega0 = scan
        .reference_wavelength_nm
        .map(|wl| TAU * crate::planner::SPEED_OF_LIGHT / (wl * 1e-9))
        .unwrap_or(0.0);
    let device = DeviceModel {
        target: ModeFamily {
            omega0,
            d1,
            d2: TAU * refit.d2_fit_hz,
            d3: TAU * refit.d3_fit_hz.unwrap_or(0.0),
            kappa: TAU * kappa_hz,
        },
        crossings,
        eta_e: EtaTable::uniform(opts.eta_e.unwrap_or(1.0)),
        raw_shifts,
    };
    device.validate()?;
    Ok(DeviceFit {
        device,
        crossings: recoveries,
        unfit_clusters: unfit,
        refined_d2_hz: refit.d2_fit_hz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn synthetic_scan(kappa_hz: f64, with_crossing: Option<(f64, f64, f64)>) -> DispersionScan {
        let mut samples = Vec::new();
        for k in -35..=35 {
            let kf = f64::from(k);
            let mut y = 26.5e3 * kf * kf / 2.0;
            if let Some((a, w, k0)) = with_crossing {
                y += lorentzian(a, w, k0, kf);
            }
            samples.push((k, y));
        }
        DispersionScan { samples, reference_wavelength_nm: None, kappa_hz: Some(kappa_hz) }
    }

    #[test]
    fn parses_a_small_scan_with_metadata() {
        let text = "# kappa_hz = 12.142e6\nk,dint_hz\n0,0.0\n1,13250\n";
        let scan = parse_scan(text).unwrap();
        assert_eq!(scan.samples.len(), 2);
        assert_eq!(scan.kappa_hz, Some(12.142e6));
        let back = parse_scan(&scan_to_csv(&scan)).unwrap();
        assert_eq!(back, scan);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let dup = "k,dint_hz\n5,1.0\n5,2.0\n";
        match parse_scan(dup) {
            Err(ScanError::DuplicateIndex { line: 3, k: 5 }) => {}
            other => panic!("{other:?}"),
        }
        let noheader = "5,1.0\n";
        assert!(matches!(parse_scan(noheader), Err(ScanError::Header { line: 1, .. })));
        let bad = "k,dint_hz\nx,1.0\n";
        assert!(matches!(parse_scan(bad), Err(ScanError::Number { line: 2, .. })));
        assert!(matches!(parse_scan(""), Err(ScanError::Empty)));
        assert!(matches!(parse_scan("k,dint_hz\n"), Err(ScanError::Empty)));
    }

    #[test]
    fn clean_parabola_is_recovered_to_machine_precision() {
        let scan = synthetic_scan(12.142e6, None);
        let fit = fit_background(&scan, &FitOptions::default()).unwrap();
        assert_abs_diff_eq!(fit.d2_fit_hz, 26.5e3, epsilon = 26.5e3 * 1e-11);
        assert!(fit.excluded.is_empty());
    }

    #[test]
    fn constant_zero_scan_fits_zero() {
        let samples = (-10..=10).map(|k| (k, 0.0)).collect();
        let scan = DispersionScan { samples, reference_wavelength_nm: None, kappa_hz: None };
        let fit = fit_background(&scan, &FitOptions::default()).unwrap();
        assert_eq!(fit.d2_fit_hz, 0.0);
    }

    #[test]
    fn robust_fit_shrugs_off_an_outlier() {
        let kappa = 12.142e6;
        let mut scan = synthetic_scan(kappa, None);
        let idx = scan.samples.iter().position(|&(k, _)| k == -24).unwrap();
        scan.samples[idx].1 += 10.0 * kappa;
        let robust = fit_background(&scan, &FitOptions::default()).unwrap();
        assert!((robust.d2_fit_hz / 26.5e3 - 1.0).abs() < 0.01);
        assert_eq!(robust.excluded, vec![-24]);

        let plain =
            fit_background(&scan, &FitOptions { robust: false, ..Default::default() }).unwrap();
        assert!((plain.d2_fit_hz / 26.5e3 - 1.0).abs() > 0.01);
    }

    #[test]
    fn detection_flags_the_injected_mode_and_splits_windows() {
        let kappa = 12.142e6;
        let mut scan = synthetic_scan(kappa, None);
        let idx = scan.samples.iter().position(|&(k, _)| k == -24).unwrap();
        scan.samples[idx].1 += 5.0 * kappa / 2.0;
        let fit = fit_background(&scan, &FitOptions::default()).unwrap();
        let det = detect_amx(&scan, &fit, 1.0).unwrap();
        assert_eq!(det.flagged, vec![-24]);
        assert_eq!(det.windows, vec![(-35, -25), (-23, 35)]);
    }

    #[test]
    fn no_flags_means_one_window() {
        let scan = synthetic_scan(12.142e6, None);
        let fit = fit_background(&scan, &FitOptions::default()).unwrap();
        let det = detect_amx(&scan, &fit, 1.0).unwrap();
        assert!(det.flagged.is_empty());
        assert_eq!(det.windows, vec![(-35, 35)]);
    }

    #[test]
    fn threshold_zero_flags_anything_nonzero() {
        let kappa = 12.142e6;
        let mut scan = synthetic_scan(kappa, None);
        scan.samples[3].1 += 1.0; // one Hz
        let fit = fit_background(&scan, &FitOptions::default()).unwrap();
        let det = detect_amx(&scan, &fit, 0.0).unwrap();
        assert!(!det.flagged.is_empty());
    }

    #[test]
    fn missing_linewidth_is_an_instructive_error() {
        let mut scan = synthetic_scan(1.0, None);
        scan.kappa_hz = None;
        let fit = fit_background(&scan, &FitOptions::default()).unwrap();
        let err = detect_amx(&scan, &fit, 1.0).unwrap_err();
        assert!(err.to_string().contains("kappa_hz"));
    }

    #[test]
    fn window_breaks_on_index_gaps() {
        let mut samples: Vec<(i32, f64)> = (-5..=5).map(|k| (k, 0.0)).collect();
        samples.retain(|&(k, _)| k != 0);
        let scan = DispersionScan { samples, reference_wavelength_nm: None, kappa_hz: Some(1.0) };
        let fit = fit_background(&scan, &FitOptions::default()).unwrap();
        let det = detect_amx(&scan, &fit, 1.0).unwrap();
        assert_eq!(det.windows, vec![(-5, -1), (1, 5)]);
    }

    #[test]
    fn crossing_cluster_round_trips_through_the_device_model() {
        let kappa = 12.142e6;
        let (w, s_hz, k0) = (0.06, 20e6, -24.3);
        let a = 2.0 * w * 8.0 * kappa; // peak of 8 linewidths
        let scan = synthetic_scan(kappa, Some((a, w, k0)));
        let fit = fit_background(&scan, &FitOptions::default()).unwrap();
        let det = detect_amx(&scan, &fit, 1.0).unwrap();
        assert_eq!(det.flagged, vec![-26, -25, -24, -23]);

        let built = to_device_model(
            &scan,
            &det,
            kappa,
            &DeviceBuildOptions { fsr_mismatch_hz: Some(s_hz), ..Default::default() },
        )
        .unwrap();
        assert!((built.refined_d2_hz / 26.5e3 - 1.0).abs() < 1e-3);
        let g_true = (a * s_hz).sqrt();
        let kc_true = 2.0 * w * s_hz;
        let c = &built.device.crossings[0];
        assert!((c.g / TAU / g_true - 1.0).abs() < 0.01);
        assert!((c.kappa_c / TAU / kc_true - 1.0).abs() < 0.01);
        assert_abs_diff_eq!(c.k0, k0, epsilon = 1e-3);
        assert!(!built.crossings[0].gauge);
    }

    #[test]
    fn unknown_mismatch_falls_back_to_the_documented_gauge() {
        let kappa = 12.142e6;
        let a = 2.0 * 0.06 * 8.0 * kappa;
        let scan = synthetic_scan(kappa, Some((a, 0.06, -24.3)));
        let fit = fit_background(&scan, &FitOptions::default()).unwrap();
        let det = detect_amx(&scan, &fit, 1.0).unwrap();
        let built =
            to_device_model(&scan, &det, kappa, &DeviceBuildOptions::default()).unwrap();
        assert!(built.crossings[0].gauge);
        // in the gauge s = kappa_hz, so kappa_c = 2 w kappa
        assert_abs_diff_eq!(
            built.device.crossings[0].kappa_c / TAU,
            2.0 * built.crossings[0].width_modes * kappa,
            epsilon = 1.0
        );
    }

    #[test]
    fn tiny_cluster_becomes_raw_shifts() {
        let kappa = 12.142e6;
        let mut scan = synthetic_scan(kappa, None);
        let idx = scan.samples.iter().position(|&(k, _)| k == 10).unwrap();
        scan.samples[idx].1 += 4.0 * kappa;
        let fit = fit_background(&scan, &FitOptions::default()).unwrap();
        let det = detect_amx(&scan, &fit, 1.0).unwrap();
        assert_eq!(det.flagged, vec![10]);
        let built =
            to_device_model(&scan, &det, kappa, &DeviceBuildOptions::default()).unwrap();
        assert!(built.device.crossings.is_empty());
        assert_eq!(built.unfit_clusters, vec![(10, 10)]);
        let shift = built.device.raw_shifts[&10] / TAU;
        assert_abs_diff_eq!(shift, 4.0 * kappa, epsilon = 4.0 * kappa * 1e-3);
    }

    #[test]
    fn refit_on_model_output_is_idempotent() {
        let scan = synthetic_scan(12.142e6, None);
        let fit = fit_background(&scan, &FitOptions::default()).unwrap();
        let regenerated = DispersionScan {
            samples: scan
                .samples
                .iter()
                .map(|&(k, _)| (k, fit.d2_fit_hz * f64::from(k) * f64::from(k) / 2.0))
                .collect(),
            ..scan.clone()
        };
        let refit = fit_background(&regenerated, &FitOptions::default()).unwrap();
        assert_abs_diff_eq!(refit.d2_fit_hz, fit.d2_fit_hz, epsilon = fit.d2_fit_hz * 1e-12);
    }

    #[test]
    fn device_build_requires_detection() {
        let scan = synthetic_scan(12.142e6, None);
        let fit = fit_background(&scan, &FitOptions::default()).unwrap();
        assert!(matches!(
            to_device_model(&scan, &fit, 12.142e6, &DeviceBuildOptions::default()),
            Err(FitError::NotDetected)
        ));
    }
}
