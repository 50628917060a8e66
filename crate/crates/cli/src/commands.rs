use nrdetect::validation::{run_check, ValidationConfig, ValidationReport};
use nrdetect::{
    d0_general_law, detector_law, empirical_rocs, kappa_grid, log_pfa_grid, pd_exact, pd_vs_kappa,
    pfa_grid_below_one, rho_of_range, roc_approx_curve, roc_exact, sample_statistics,
    CovarianceSpec, DetectorSpec, Hypothesis, RangeModel, RocCurve, Sign, TrialPlan, VgDensity,
};

use crate::args::{DetectorArg, MethodArg, PdfArgs, RangeArgs, RocArgs, SweepArgs, ValidateArgs};
use crate::output::{emit_csv, num, RunManifest};
use crate::{CliError, CliResult};

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn pdf(a: &PdfArgs) -> CliResult<u8> {
    if !(a.x_min.is_finite() && a.x_max.is_finite() && a.x_min < a.x_max) {
        return Err(usage("--x-min must be below --x-max"));
    }
    if a.points < 2 {
        return Err(usage("--points must be at least 2"));
    }
    if a.mc_trials == Some(0) {
        return Err(usage("--mc-trials must be positive"));
    }
    let sign: Sign = a.sign.into();
    let (law, cov) = if a.general {
        if a.kappa != 0.0 {
            return Err(usage(
                "--general describes D_0; it cannot be combined with a nonzero --kappa",
            ));
        }
        let cov = CovarianceSpec::new(
            a.sigma1.unwrap_or(1.0),
            a.sigma2.unwrap_or(1.0),
            a.rho,
            a.phi.unwrap_or(0.0),
            sign,
        )?;
        (d0_general_law(&cov, a.n)?, cov)
    } else {
        (
            detector_law(a.rho, a.kappa, a.n)?,
            CovarianceSpec::simplified(a.rho, sign)?,
        )
    };
    let density = VgDensity::new(law)?;
    let h = (a.x_max - a.x_min) / (a.points - 1) as f64;
    let xs: Vec<f64> = (0..a.points)
        .map(|i| {
            if i + 1 == a.points {
                a.x_max
            } else {
                a.x_min + h * i as f64
            }
        })
        .collect();

    let empirical = match a.mc_trials {
        None => None,
        Some(trials) => {
            let plan = TrialPlan::new(cov, DetectorSpec::new(a.kappa, a.n, sign)?, trials, a.seed)?;
            let draws = sample_statistics(&plan, Hypothesis::Alt)?;
            // histogram with one bin of width h centred on each grid point
            let mut counts = vec![0usize; a.points];
            for d in draws {
                let k = ((d - a.x_min) / h + 0.5).floor();
                if k >= 0.0 && (k as usize) < a.points {
                    counts[k as usize] += 1;
                }
            }
            Some(
                counts
                    .into_iter()
                    .map(|c| c as f64 / (trials as f64 * h))
                    .collect::<Vec<_>>(),
            )
        }
    };

    let mut header = vec!["x", "pdf_analytic"];
    if empirical.is_some() {
        header.push("pdf_empirical");
    }
    let rows: Vec<Vec<String>> = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let mut r = vec![num(x), num(density.pdf(x))];
            if let Some(e) = &empirical {
                r.push(num(e[i]));
            }
            r
        })
        .collect();
    emit_csv(
        a.out.as_deref(),
        &header,
        &rows,
        RunManifest::new("pdf", a, a.seed),
    )?;
    Ok(0)
}

fn pfa_grid(min: f64, max: Option<f64>, points: usize) -> CliResult<Vec<f64>> {
    Ok(match max {
        Some(max) => log_pfa_grid(min, max, points)?,
        None => pfa_grid_below_one(min, points)?,
    })
}

fn curve_rows(curve: &RocCurve, rows: &mut Vec<Vec<String>>) {
    for p in &curve.points {
        rows.push(vec![
            num(p.pfa),
            num(p.pd),
            curve.method.as_str().to_string(),
            num(curve.meta.kappa),
            p.stderr.map(num).unwrap_or_default(),
        ]);
    }
}

pub fn roc(a: &RocArgs) -> CliResult<u8> {
    let wants_empirical = matches!(a.method, MethodArg::Empirical | MethodArg::All);
    if wants_empirical && a.trials.is_none() {
        return Err(usage("--method empirical (and all) needs --trials"));
    }
    if a.trials == Some(0) {
        return Err(usage("--trials must be positive"));
    }
    let grid = pfa_grid(a.pfa_min, a.pfa_max, a.pfa_points)?;
    let sign: Sign = a.sign.into();
    let mut manifest = RunManifest::new("roc", a, a.seed);

    let empirical = match a.trials {
        Some(trials) if wants_empirical => {
            let plan = TrialPlan::new(
                CovarianceSpec::simplified(a.rho, sign)?,
                DetectorSpec::new(a.kappa[0], a.n, sign)?,
                trials,
                a.seed,
            )?;
            empirical_rocs(&plan, &a.kappa, &grid)?
        }
        _ => Vec::new(),
    };

    let mut rows = Vec::new();
    for (i, &kappa) in a.kappa.iter().enumerate() {
        if matches!(a.method, MethodArg::Exact | MethodArg::All) {
            let c = roc_exact(a.rho, kappa, a.n, &grid)?;
            if c.used_fallback() {
                manifest.fallbacks_used.push(format!(
                    "chi-square-difference CDF (exact, kappa = {kappa})"
                ));
            }
            curve_rows(&c, &mut rows);
        }
        if matches!(a.method, MethodArg::Approx | MethodArg::All) {
            curve_rows(&roc_approx_curve(a.rho, kappa, a.n, &grid)?, &mut rows);
        }
        if let Some(c) = empirical.get(i) {
            curve_rows(c, &mut rows);
        }
    }
    emit_csv(
        a.out.as_deref(),
        &["pfa", "pd", "method", "kappa", "stderr"],
        &rows,
        manifest,
    )?;
    Ok(0)
}

pub fn sweep_kappa(a: &SweepArgs) -> CliResult<u8> {
    if !(a.kappa_step > 0.0) {
        return Err(usage("--kappa-step must be positive"));
    }
    let grid = kappa_grid(a.kappa_step, a.kappa_max)?;
    let mut rows = Vec::new();
    for &n in &a.n {
        let s = pd_vs_kappa(a.rho, n, a.pfa, &grid)?;
        for (k, v) in s.kappa.iter().zip(&s.normalized) {
            rows.push(vec![num(*k), n.to_string(), num(*v), "value".into()]);
        }
        rows.push(vec![
            num(s.argmax_kappa),
            n.to_string(),
            num(1.0),
            "argmax".into(),
        ]);
    }
    emit_csv(
        a.out.as_deref(),
        &["kappa", "n", "pd_normalized", "row_type"],
        &rows,
        RunManifest::new("sweep-kappa", a, a.seed),
    )?;
    Ok(0)
}

pub fn range(a: &RangeArgs) -> CliResult<u8> {
    let model = RangeModel::new(a.rho0, a.rc)?;
    if !(a.r_max > 0.0 && a.r_max.is_finite()) {
        return Err(usage("--r-max must be positive"));
    }
    if a.points < 2 {
        return Err(usage("--points must be at least 2"));
    }
    let mut rows = Vec::with_capacity(a.points);
    for i in 0..a.points {
        let r = if i + 1 == a.points {
            a.r_max
        } else {
            a.r_max * i as f64 / (a.points - 1) as f64
        };
        let rho = rho_of_range(&model, r)?;
        let kappa = match a.detector {
            DetectorArg::Optimal => rho,
            DetectorArg::D0 => 0.0,
        };
        rows.push(vec![
            num(r),
            num(rho),
            num(pd_exact(rho, kappa, a.n, a.pfa)?),
        ]);
    }
    emit_csv(
        a.out.as_deref(),
        &["range", "rho", "pd"],
        &rows,
        RunManifest::new("range", a, a.seed),
    )?;
    Ok(0)
}

pub fn validate(a: &ValidateArgs) -> CliResult<u8> {
    let mut cfg = if a.quick {
        ValidationConfig::quick(a.seed)
    } else {
        ValidationConfig::full(a.seed)
    };
    cfg.flip_detector_sign = a.mutate_sign;
    let ids: Vec<u8> = if a.only.is_empty() {
        (1..=12).collect()
    } else {
        a.only.clone()
    };
    if let Some(bad) = ids.iter().find(|i| !(1..=12).contains(*i)) {
        return Err(usage(format!(
            "no check with id {bad}; ids run from 1 to 12"
        )));
    }
    let mut checks = Vec::new();
    for id in ids {
        let r = run_check(id, &cfg)?;
        eprintln!(
            "check {:>2} {:<36} {}",
            r.id,
            r.name,
            if r.passed { "PASS" } else { "FAIL" }
        );
        checks.push(r);
    }
    let passed = checks.iter().all(|c| c.passed);
    let report = ValidationReport {
        config: cfg,
        checks,
        passed,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    match &a.out {
        Some(p) => std::fs::write(p, json)?,
        None => print!("{json}"),
    }
    Ok(if passed { 0 } else { 1 })
}
