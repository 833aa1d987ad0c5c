use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};

use cvcomb::calibration;
use cvcomb::device_file;
use cvcomb::dispersion::{self, DeviceBuildOptions, FitOptions};
use cvcomb::modes::{DeviceModel, ModeFamily};
use cvcomb::planner;
use cvcomb::squeezing::{self, PumpCondition};
use cvcomb::verify::{
    equivalence_grid, optimum_structure, physicality_suite, reference_formula, stochastic_suite,
    GridPoint, GridSpec,
};

use crate::config;
use crate::output::{csv_header, num, write_atomic};
use crate::svg;
use crate::{CalibrateArgs, FitArgs, PlanArgs, SpectrumArgs, VerifyArgs};

fn emit(out: Option<&PathBuf>, content: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => write_atomic(path, content),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

pub fn spectrum(args: SpectrumArgs, cfg: config::SpectrumConfig) -> anyhow::Result<ExitCode> {
    let device_path = args.device.or(cfg.device);
    let d2_hz = args.d2_hz.or(cfg.d2_hz);
    let d3_hz = args.d3_hz.or(cfg.d3_hz);
    let kappa_hz = args.kappa_hz.or(cfg.kappa_hz);
    let alpha = args
        .alpha
        .or(cfg.alpha)
        .context("spectrum needs --alpha (pump parameter, 0 <= alpha < 1)")?;
    let zeta0 = args.zeta0.or(cfg.zeta0).unwrap_or(0.0);
    let eta_d = args.eta_d.or(cfg.eta_d).unwrap_or(1.0);
    let k_min = args.k_min.or(cfg.k_min).unwrap_or(1);
    let k_max = args.k_max.or(cfg.k_max).unwrap_or(30);
    let dkappa_warn = args.dkappa_warn.or(cfg.dkappa_warn).unwrap_or(1.0);
    let out = args.out.or(cfg.out);
    let svg_path = args.svg.or(cfg.svg);

    let (mut dev, source) = match (&device_path, d2_hz) {
        (Some(path), Some(_)) => {
            bail!(
                "both --device and --d2-hz given; describe the device one way \
                 ({} already carries the dispersion)",
                path.display()
            )
        }
        (Some(path), None) => (
            device_file::load_device(path)
                .with_context(|| format!("cannot load device {}", path.display()))?,
            format!("device={}", path.display()),
        ),
        (None, Some(d2)) => {
            let kappa = kappa_hz.context(
                "an inline device needs both --d2-hz and --kappa-hz (or use --device FILE)",
            )?;
            let dev = DeviceModel::new(ModeFamily {
                omega0: 0.0,
                // absolute comb position never enters pair detunings, and
                // with no crossings the FSR cancels too
                d1: 1.0,
                d2: TAU * d2,
                d3: TAU * d3_hz.unwrap_or(0.0),
                kappa: TAU * kappa,
            });
            (dev, format!("d2_hz={} kappa_hz={}", num(d2), num(kappa)))
        }
        (None, None) => {
            bail!("describe the resonator: --device FILE, or --d2-hz with --kappa-hz")
        }
    };
    if let Some(eta_e) = args.eta_e.or(cfg.eta_e) {
        dev.eta_e.default = eta_e;
    }
    if k_min < 1 || k_max < k_min {
        bail!("pair indices must satisfy 1 <= k_min <= k_max, got {k_min}..={k_max}");
    }

    let pump = PumpCondition { alpha, zeta0, eta_e: dev.eta_e.default, eta_d };
    let rows = squeezing::spectrum(&dev, &pump, k_min..=k_max, dkappa_warn)?;

    let params = format!(
        "{source} alpha={} zeta0={} eta_e={} eta_d={} k={}..{} dkappa_warn={}",
        num(alpha),
        num(zeta0),
        num(dev.eta_e.default),
        num(eta_d),
        k_min,
        k_max,
        num(dkappa_warn)
    );
    let mut csv = csv_header("spectrum", &params);
    csv.push_str("k,zeta_bar,delta,dkappa_plus,dkappa_minus,eta,variance,sl_db,warn\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            r.k,
            num(r.zeta_bar),
            num(r.delta),
            num(r.dkappa_plus),
            num(r.dkappa_minus),
            num(r.eta),
            num(r.variance),
            num(r.sl_db),
            u8::from(r.warn)
        );
    }
    emit(out.as_ref(), &csv)?;

    if let Some(path) = svg_path {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (f64::from(r.k), r.sl_db)).collect();
        let chart = svg::chart(
            &format!("squeezing spectrum, alpha={}", num(alpha)),
            "pair index k (sidebands at modes +k and -k of the pump)",
            "squeezing level (dB)",
            &[svg::Series { points: &pts, line: true }],
        );
        write_atomic(&path, &chart)?;
    }
    Ok(ExitCode::SUCCESS)
}

pub fn verify(args: VerifyArgs, cfg: config::VerifyConfig) -> anyhow::Result<ExitCode> {
    let tol = args.tol.or(cfg.tol).unwrap_or(1e-9);
    let quick = args.quick || cfg.quick.unwrap_or(false);
    let stochastic = args.stochastic || cfg.stochastic.unwrap_or(false);
    let seed = args.seed.or(cfg.seed).unwrap_or(7);
    let spec = if quick { GridSpec::quick() } else { GridSpec::acceptance() };

    let mut all_ok = true;
    let mut status = |ok: bool| {
        all_ok &= ok;
        if ok {
            "ok"
        } else {
            "FAIL"
        }
    };

    if args.corrupt_formula {
        println!("note: running with a deliberately corrupted formula; expect failure");
    }
    let formula = |p: GridPoint| {
        if args.corrupt_formula {
            // detuning optimum moved from 2 alpha to -2 alpha
            squeezing::sum_quadrature_variance(
                p.alpha,
                p.zeta_bar + 4.0 * p.alpha,
                p.delta,
                p.eta_e * p.eta_d,
            )
            .variance
        } else {
            reference_formula(p)
        }
    };

    let eq = equivalence_grid(&spec, formula)?;
    let eq_ok = eq.passes(tol);
    println!(
        "equivalence: {} points, max relative discrepancy {:.3e} at [{}] (tol {:.1e}): {}",
        eq.points,
        eq.max_rel_discrepancy,
        eq.worst,
        tol,
        status(eq_ok)
    );

    let phys = physicality_suite(&spec)?;
    let phys_ok = phys.passes(1e-9);
    println!(
        "physicality: min covariance eigenvalue {:.3e}, min uncertainty product {:.12}, \
         far-detuned deviation {:.3e}: {}",
        phys.min_eigenvalue,
        phys.min_uncertainty,
        phys.max_far_detuned_deviation,
        status(phys_ok)
    );

    let opt = optimum_structure(&spec);
    let opt_ok = opt.passes();
    println!(
        "optimum: argmin offset {:.3} grid steps, {} splitting-monotonicity violations: {}",
        opt.max_argmin_offset,
        opt.monotonicity_violations,
        status(opt_ok)
    );

    if stochastic {
        let st = stochastic_suite(seed)?;
        let st_ok = st.passes(3.0);
        let pulls: Vec<String> = st.checks.iter().map(|c| format!("{:+.2}", c.pull)).collect();
        println!(
            "stochastic: pulls [{}] sigma (seed {seed}, limit 3.0): {}",
            pulls.join(", "),
            status(st_ok)
        );
    }

    println!("verdict: {}", if all_ok { "PASS" } else { "FAIL" });
    Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

pub fn calibrate(args: CalibrateArgs, cfg: config::CalibrateConfig) -> anyhow::Result<ExitCode> {
    let alpha = args
        .alpha
        .or(cfg.alpha)
        .context("calibrate needs --alpha (pump parameter, 0 <= alpha < 1)")?;
    let zeta0 = args.zeta0.or(cfg.zeta0).unwrap_or_default();
    if zeta0.is_empty() {
        bail!("calibrate needs --zeta0 with at least one operating detuning (comma separated)");
    }
    let eta_e = args
        .eta_e
        .or(cfg.eta_e)
        .context("calibrate needs --eta-e (pump-mode extraction efficiency)")?;
    let pth_uw = args.pth_uw.or(cfg.pth_uw);
    let out = args.out.or(cfg.out);

    let params = format!(
        "alpha={} zeta0={} eta_e={} pth_uw={}",
        num(alpha),
        zeta0.iter().map(|z| num(*z)).collect::<Vec<_>>().join(","),
        num(eta_e),
        pth_uw.map(num).unwrap_or_else(|| "none".into())
    );
    let mut csv = csv_header("calibrate", &params);
    csv.push_str("alpha,zeta0,f_squared,power_uw,transmission\n");
    for &z0 in &zeta0 {
        let point = calibration::calibration_point(alpha, z0, eta_e, pth_uw.map(|p| p * 1e-6))?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            num(alpha),
            num(z0),
            num(point.f_squared),
            point.power_w.map(|p| num(p * 1e6)).unwrap_or_default(),
            num(point.transmission)
        );
    }
    emit(out.as_ref(), &csv)?;
    Ok(ExitCode::SUCCESS)
}

pub fn plan(args: PlanArgs, cfg: config::PlanConfig) -> anyhow::Result<ExitCode> {
    let alpha = args
        .alpha
        .or(cfg.alpha)
        .context("plan needs --alpha (pump parameter, 0 <= alpha < 1)")?;
    if !(0.0..1.0).contains(&alpha) {
        bail!("alpha must satisfy 0 <= alpha < 1 to stay below the oscillation threshold, got {alpha}");
    }
    let d2_hz = args.d2_hz.or(cfg.d2_hz);
    let d2_norm = match (
        args.d2_norm.or(cfg.d2_norm),
        d2_hz,
        args.kappa_hz.or(cfg.kappa_hz),
        args.wavelength_nm.or(cfg.wavelength_nm),
        args.q_loaded.or(cfg.q_loaded),
    ) {
        (Some(d2n), ..) => d2n,
        (None, Some(d2), Some(kappa), _, _) => 2.0 * d2 / kappa,
        (None, Some(d2), None, Some(wl), Some(q)) => {
            planner::d2_norm_from_physical(d2, wl * 1e-9, q)
        }
        _ => bail!(
            "give the dispersion step one way: --d2-norm, or --d2-hz with --kappa-hz, \
             or --d2-hz with --wavelength-nm and --q-loaded"
        ),
    };
    if d2_norm <= 0.0 {
        bail!("the planner assumes anomalous dispersion (d2_norm > 0), got {d2_norm}");
    }
    let zeta0_max = args.zeta0_max.or(cfg.zeta0_max).unwrap_or(alpha);
    let k_max = args.k_max.or(cfg.k_max).unwrap_or(200);
    let out = args.out.or(cfg.out);
    let sweep_out = args.sweep_out.or(cfg.sweep_out);
    let svg_path = args.svg.or(cfg.svg);

    let (best_zeta0, best) =
        planner::optimize_zeta0(alpha, d2_norm, zeta0_max, k_max);
    let degradation = planner::degradation_within_regime(alpha, 1.0);
    let doc = serde_json::json!({
        "alpha": alpha,
        "d2_norm": d2_norm,
        "zeta0_max": zeta0_max,
        "k_max_available": k_max,
        "optimize_step": planner::OPTIMIZE_STEP,
        "best_zeta0": best_zeta0,
        "plan": best,
        // db assumes lossless detection; the ratio is what survives any eta
        "edge_degradation": {
            "db_lossless": degradation.db,
            "reduction_ratio": degradation.reduction_ratio,
        },
    });
    emit(out.as_ref(), &format!("{}\n", serde_json::to_string_pretty(&doc)?))?;

    if sweep_out.is_some() || svg_path.is_some() {
        let sweep = planner::sweep_zeta0(alpha, d2_norm, zeta0_max, planner::SWEEP_STEP, k_max);
        if let Some(path) = sweep_out {
            let params = format!(
                "alpha={} d2_norm={} zeta0_max={} step={} k_max={}",
                num(alpha),
                num(d2_norm),
                num(zeta0_max),
                num(planner::SWEEP_STEP),
                k_max
            );
            let mut csv = csv_header("plan sweep", &params);
            csv.push_str("zeta0,n_pairs,k_min,k_max\n");
            for p in &sweep {
                let _ = writeln!(
                    csv,
                    "{},{},{},{}",
                    num(p.zeta0),
                    p.n_pairs,
                    p.k_min.map(|k| k.to_string()).unwrap_or_default(),
                    p.k_max.map(|k| k.to_string()).unwrap_or_default()
                );
            }
            write_atomic(&path, &csv)?;
        }
        if let Some(path) = svg_path {
            let pts: Vec<(f64, f64)> =
                sweep.iter().map(|p| (p.zeta0, p.n_pairs as f64)).collect();
            let chart = svg::chart(
                &format!("uniform-regime pairs, alpha={}", num(alpha)),
                "pump detuning zeta0",
                "pairs in regime",
                &[svg::Series { points: &pts, line: true }],
            );
            write_atomic(&path, &chart)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn fit(args: FitArgs, cfg: config::FitConfig) -> anyhow::Result<ExitCode> {
    let degree = args.degree.or(cfg.degree).unwrap_or(2);
    let robust = if args.no_robust { false } else { cfg.robust.unwrap_or(true) };
    let threshold = args.threshold.or(cfg.threshold).unwrap_or(1.0);

    let mut scan = dispersion::load_scan(&args.scan)
        .with_context(|| format!("cannot parse scan {}", args.scan.display()))?;
    if let Some(kappa) = args.kappa_hz.or(cfg.kappa_hz) {
        scan.kappa_hz = Some(kappa);
    }

    let opts = FitOptions { degree, robust, ..FitOptions::default() };
    let fit = dispersion::fit_background(&scan, &opts)?;
    let det = dispersion::detect_amx(&scan, &fit, threshold)?;

    println!(
        "background: d2 = {:.6} kHz{} over {} modes{}",
        det.d2_fit_hz / 1e3,
        det.d3_fit_hz
            .map(|d3| format!(", d3 = {:.6} kHz", d3 / 1e3))
            .unwrap_or_default(),
        scan.samples.len(),
        if det.excluded.is_empty() {
            String::new()
        } else {
            format!(" (excluded {:?})", det.excluded)
        }
    );
    println!(
        "crossing-perturbed modes ({} half-linewidth threshold): {:?}",
        num(threshold),
        det.flagged
    );
    println!("clean windows: {:?}", det.windows);

    if let Some(path) = args.report.or(cfg.report) {
        let params = format!(
            "scan={} degree={degree} robust={robust} threshold={} kappa_hz={}",
            args.scan.display(),
            num(threshold),
            scan.kappa_hz.map(num).unwrap_or_else(|| "none".into())
        );
        let mut csv = csv_header("fit", &params);
        csv.push_str("k,dint_hz,fit_hz,residual_hz,flagged\n");
        for (&(k, y), &r) in scan.samples.iter().zip(&det.residuals_hz) {
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                k,
                num(y),
                num(y - r),
                num(r),
                u8::from(det.flagged.contains(&k))
            );
        }
        write_atomic(&path, &csv)?;
    }

    if let Some(path) = args.device_out.or(cfg.device_out) {
        let kappa_hz = scan.kappa_hz.expect("detection above required a linewidth");
        let build = DeviceBuildOptions {
            fsr_mismatch_hz: args.fsr_mismatch_hz.or(cfg.fsr_mismatch_hz),
            fsr_hz: args.fsr_hz.or(cfg.fsr_hz),
            eta_e: args.eta_e.or(cfg.eta_e),
        };
        let built = dispersion::to_device_model(&scan, &det, kappa_hz, &build)?;
        for (rec, c) in built.crossings.iter().zip(&built.device.crossings) {
            println!(
                "crossing near k0 = {:.3}: g = {:.4} MHz, kappa_c = {:.4} MHz{}",
                rec.k0,
                c.g / TAU / 1e6,
                c.kappa_c / TAU / 1e6,
                if rec.gauge {
                    " (gauge: mismatch unknown, scaled to one linewidth per mode; \
                     pass --fsr-mismatch-hz to resolve)"
                } else {
                    ""
                }
            );
        }
        for (lo, hi) in &built.unfit_clusters {
            println!(
                "cluster {lo}..{hi} too small to fit a crossing profile; carried as raw shifts"
            );
        }
        println!("refined d2 = {:.6} kHz", built.refined_d2_hz / 1e3);
        write_atomic(&path, &device_file::device_to_toml(&built.device))?;
        println!("device model written to {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}
