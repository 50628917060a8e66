//! Acceptance checks tying the analytic results to each other and to simulation.
//!
//! Each check returns a [`CheckResult`] with the worst measured value and the
//! tolerance it was held to. [`run_all`] runs the twelve checks in order.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::detector::{llr, np_statistic, DetectorSpec};
use crate::error::Result;
use crate::montecarlo::{empirical_rocs, gof_test, sample_statistics, Hypothesis, TrialPlan};
use crate::rng::StreamKey;
use crate::roc::{
    compare_d0_vs_optimal, default_pfa_grid, kappa_grid, pd_vs_kappa, roc0_approx, roc_approx_clt,
    roc_exact, RocCurve,
};
use crate::signal::{
    build_covariance, quadratic_form_matrix, sample_batch, whitening_matrix_signed, CovarianceSpec,
    Sign,
};
use crate::vg::{d0_general_law, detector_law, vg_cf, VgDensity};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_220_601;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    /// Monte Carlo trials per simulated curve or sample.
    pub trials: usize,
    /// Multiple of the standard error allowed between simulation and theory.
    pub se_multiplier: f64,
    /// KS significance level.
    pub alpha: f64,
    pub seed: u64,
    /// Compute the detector with the opposite sign convention from the data.
    /// Only useful to show that the distribution checks catch such a bug.
    pub flip_detector_sign: bool,
}

impl ValidationConfig {
    pub fn full(seed: u64) -> Self {
        ValidationConfig {
            trials: 100_000,
            se_multiplier: 3.0,
            alpha: 0.01,
            seed,
            flip_detector_sign: false,
        }
    }

    /// Ten times fewer trials, four standard errors and `alpha = 0.001`.
    pub fn quick(seed: u64) -> Self {
        ValidationConfig {
            trials: 10_000,
            se_multiplier: 4.0,
            alpha: 0.001,
            ..Self::full(seed)
        }
    }
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self::full(DEFAULT_SEED)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    /// Worst-case measured quantity.
    pub statistic: f64,
    /// Bound the statistic was compared with.
    pub tolerance: f64,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub config: ValidationConfig,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

pub const CHECK_NAMES: [&str; 12] = [
    "whitening identity",
    "simultaneous diagonalization",
    "detector law (KS)",
    "characteristic function",
    "moment identity",
    "kappa dominance and empirical ROC",
    "kappa sweep argmax",
    "large-N ROC approximation",
    "D_rho versus D_0 gap",
    "general covariance and phase law",
    "null diagonal",
    "LLR ordering",
];

struct Outcome {
    passed: bool,
    statistic: f64,
    tolerance: f64,
    detail: String,
}

/// Outcome for "statistic <= tolerance".
fn at_most(statistic: f64, tolerance: f64, detail: String) -> Outcome {
    Outcome {
        passed: statistic <= tolerance,
        statistic,
        tolerance,
        detail,
    }
}

pub fn run_check(id: u8, cfg: &ValidationConfig) -> Result<CheckResult> {
    let start = Instant::now();
    let o = match id {
        1 => whitening()?,
        2 => diagonalization()?,
        3 => detector_law_ks(cfg)?,
        4 => characteristic_function()?,
        5 => moments()?,
        6 => kappa_dominance(cfg)?,
        7 => kappa_sweep()?,
        8 => clt_approximation()?,
        9 => d0_gap()?,
        10 => general_covariance(cfg)?,
        11 => null_diagonal()?,
        12 => llr_ordering(cfg)?,
        _ => {
            return Err(crate::error::Error::domain(format!(
                "no check with id {id}"
            )))
        }
    };
    Ok(CheckResult {
        id,
        name: CHECK_NAMES[id as usize - 1].to_string(),
        passed: o.passed,
        statistic: o.statistic,
        tolerance: o.tolerance,
        detail: o.detail,
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn run_all(cfg: &ValidationConfig) -> Result<ValidationReport> {
    let checks = (1..=12)
        .map(|id| run_check(id, cfg))
        .collect::<Result<Vec<_>>>()?;
    let passed = checks.iter().all(|c| c.passed);
    Ok(ValidationReport {
        config: *cfg,
        checks,
        passed,
    })
}

fn tenths() -> impl Iterator<Item = f64> {
    (0..10).map(|i| i as f64 / 10.0)
}

fn max_abs(m: &Matrix4<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

fn whitening() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for sign in [Sign::Qtms, Sign::NoiseRadar] {
        for rho in tenths() {
            let b = whitening_matrix_signed(rho, sign)?;
            let s = build_covariance(&CovarianceSpec::simplified(rho, sign)?)?;
            worst = worst.max(max_abs(&(b * s * b.transpose() - Matrix4::identity())));
        }
    }
    Ok(at_most(
        worst,
        1e-12,
        "max |B S B^T - I| over rho in {0, .., 0.9}, both signs".into(),
    ))
}

fn diagonalization() -> Result<Outcome> {
    let mut worst = 0.0f64;
    let grid: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    for sign in [Sign::Qtms, Sign::NoiseRadar] {
        for &rho in &grid {
            let b_inv = whitening_matrix_signed(rho, sign)?
                .try_inverse()
                .expect("whitening matrix is invertible for rho < 1");
            for &kappa in &grid {
                let t = b_inv.transpose() * quadratic_form_matrix(kappa, sign)? * b_inv;
                let cp = (1.0 + rho) * (1.0 - kappa) / 2.0;
                let cm = (1.0 - rho) * (1.0 + kappa) / 2.0;
                let want = Matrix4::from_diagonal(&nalgebra::Vector4::new(cp, cp, -cm, -cm));
                worst = worst.max(max_abs(&(t - want)));
            }
        }
    }
    Ok(at_most(
        worst,
        1e-12,
        "max deviation from diag(c+, c+, -c-, -c-) on a 9x9 grid, both signs".into(),
    ))
}

pub const DETECTOR_LAW_SETS: [(f64, f64, u32); 7] = [
    (0.1, 0.1, 1),
    (0.5, 0.5, 1),
    (0.8, 0.8, 1),
    (0.3, 0.3, 5),
    (0.3, 0.3, 20),
    (0.1, 0.6, 1),
    (0.1, 0.9, 5),
];

fn detector_sign(cfg: &ValidationConfig, data: Sign) -> Sign {
    match (cfg.flip_detector_sign, data) {
        (false, s) => s,
        (true, Sign::Qtms) => Sign::NoiseRadar,
        (true, Sign::NoiseRadar) => Sign::Qtms,
    }
}

fn detector_law_ks(cfg: &ValidationConfig) -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut failed = Vec::new();
    for (i, &(rho, kappa, n)) in DETECTOR_LAW_SETS.iter().enumerate() {
        let sign = Sign::Qtms;
        let plan = TrialPlan::new(
            CovarianceSpec::simplified(rho, sign)?,
            DetectorSpec::new(kappa, n, detector_sign(cfg, sign))?,
            cfg.trials,
            cfg.seed.wrapping_add(300 + i as u64),
        )?;
        let xs = sample_statistics(&plan, Hypothesis::Alt)?;
        let r = gof_test(&xs, &detector_law(rho, kappa, n)?, cfg.alpha)?;
        let ratio = r.ks_statistic / r.ks_critical;
        worst = worst.max(ratio);
        if !r.passed {
            failed.push(format!("({rho}, {kappa}, {n}): D = {:.5}", r.ks_statistic));
        }
    }
    Ok(Outcome {
        passed: failed.is_empty(),
        statistic: worst,
        tolerance: 1.0,
        detail: format!(
            "worst KS statistic / critical value over 7 (rho, kappa, N) sets, {} draws each, alpha = {}{}",
            cfg.trials,
            cfg.alpha,
            if failed.is_empty() { String::new() } else { format!("; rejected {}", failed.join(", ")) }
        ),
    })
}

fn characteristic_function() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for rho in [0.1, 0.5] {
        for kappa in [0.0, 0.3] {
            for n in [1u32, 5, 50] {
                let law = detector_law(rho, kappa, n)?;
                let nf = n as f64;
                let cp = (1.0 + rho) * (1.0 - kappa) / 2.0;
                let cm = (1.0 - rho) * (1.0 + kappa) / 2.0;
                for i in 0..=40 {
                    let t = -10.0 + 0.5 * i as f64;
                    let base = Complex64::new(
                        1.0 + 4.0 * cp * cm * t * t / (nf * nf),
                        -2.0 * (rho - kappa) * t / nf,
                    );
                    let closed = base.powi(-(n as i32));
                    worst = worst.max((vg_cf(t, &law) - closed).norm());
                }
            }
        }
    }
    Ok(at_most(
        worst,
        1e-12,
        "max |cf - closed form| on 41 t-points in [-10, 10], 12 parameter sets".into(),
    ))
}

fn moments() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for rho in tenths() {
        for kappa in tenths() {
            for n in [1u32, 2, 5, 10, 20, 50, 100, 200] {
                let law = detector_law(rho, kappa, n)?;
                let var =
                    (2.0 * (rho - kappa).powi(2) + 2.0 * (1.0 - rho * kappa).powi(2)) / n as f64;
                worst = worst.max((law.mean() - 2.0 * (rho - kappa)).abs());
                worst = worst.max((law.variance() - var).abs());
            }
        }
    }
    Ok(at_most(
        worst,
        1e-12,
        "max moment error over a 10x10x8 (rho, kappa, N) grid".into(),
    ))
}

/// Standard error of an empirical `p_d` at a threshold estimated from null draws:
/// the binomial error of `p_d` combined with the false-alarm error mapped
/// through the local slope `dp_d / dp_fa = f_alt(T) / f_null(T)`.
fn empirical_se(pd: f64, pfa: f64, trials: usize, slope: f64) -> f64 {
    let n = trials as f64;
    (pd * (1.0 - pd) / n + slope * slope * pfa * (1.0 - pfa) / n).sqrt()
}

fn slope(null: &VgDensity, alt: &VgDensity, t: f64) -> f64 {
    (alt.ln_pdf(t) - null.ln_pdf(t)).exp()
}

/// Largest `|emp - exact| / se` over the grid.
fn worst_z(
    exact: &RocCurve,
    empirical: &RocCurve,
    null: &VgDensity,
    alt: &VgDensity,
    trials: usize,
) -> f64 {
    exact
        .points
        .iter()
        .zip(&empirical.points)
        .map(|(e, m)| {
            let s = slope(
                null,
                alt,
                e.threshold.expect("exact curves carry thresholds"),
            );
            let se = empirical_se(e.pd, e.pfa, trials, s).max(0.5 / trials as f64);
            (m.pd - e.pd).abs() / se
        })
        .fold(0.0, f64::max)
}

fn kappa_dominance(cfg: &ValidationConfig) -> Result<Outcome> {
    let (rho, n) = (0.3, 50);
    let kappas = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
    let grid = default_pfa_grid();
    let exact = kappas
        .iter()
        .map(|&k| roc_exact(rho, k, n, &grid))
        .collect::<Result<Vec<_>>>()?;
    let best = &exact[3];
    let mut deficit = f64::NEG_INFINITY;
    for curve in &exact {
        for (a, b) in best.points.iter().zip(&curve.points) {
            deficit = deficit.max(b.pd - a.pd);
        }
    }
    let plan = TrialPlan::new(
        CovarianceSpec::simplified(rho, Sign::Qtms)?,
        DetectorSpec::new(rho, n, Sign::Qtms)?,
        cfg.trials,
        cfg.seed.wrapping_add(600),
    )?;
    let empirical = empirical_rocs(&plan, &kappas, &grid)?;
    let mut z = 0.0f64;
    for (k, (e, m)) in kappas.iter().zip(exact.iter().zip(&empirical)) {
        let null = VgDensity::new(detector_law(0.0, *k, n)?)?;
        let alt = VgDensity::new(detector_law(rho, *k, n)?)?;
        z = z.max(worst_z(e, m, &null, &alt, cfg.trials));
    }
    let dominance_ok = deficit <= 1e-6;
    Ok(Outcome {
        passed: dominance_ok && z <= cfg.se_multiplier,
        statistic: z,
        tolerance: cfg.se_multiplier,
        detail: format!(
            "worst |empirical - exact| in standard errors over 7 curves x {} p_fa points ({} trials); \
             largest excess of any kappa over kappa = rho: {deficit:.3e} (slack 1e-6)",
            grid.len(),
            cfg.trials
        ),
    })
}

fn kappa_sweep() -> Result<Outcome> {
    let (rho, pfa) = (0.3, 1e-2);
    let grid = kappa_grid(0.01, None)?;
    let mut argmax_err = 0.0f64;
    let mut spreads = Vec::new();
    for n in [25u32, 50, 75, 100] {
        let s = pd_vs_kappa(rho, n, pfa, &grid)?;
        argmax_err = argmax_err.max((s.argmax_kappa - rho).abs());
        spreads.push(s.spread(0.6));
    }
    let monotone = spreads.windows(2).all(|w| w[1] < w[0]);
    Ok(Outcome {
        passed: argmax_err < 1e-12 && monotone,
        statistic: argmax_err,
        tolerance: 0.0,
        detail: format!(
            "|argmax kappa - 0.3| for N in {{25, 50, 75, 100}}; normalized spreads over kappa <= 0.6: {:?} ({})",
            spreads.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
            if monotone { "decreasing" } else { "NOT decreasing" }
        ),
    })
}

fn clt_approximation() -> Result<Outcome> {
    let grid: Vec<f64> = default_pfa_grid()
        .into_iter()
        .filter(|p| *p <= 0.5)
        .collect();
    let mut cases: Vec<(f64, u32)> = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3]
        .iter()
        .map(|r| (*r, 100))
        .collect();
    cases.extend([(0.2, 50), (0.2, 200)]);
    let mut worst = 0.0f64;
    let mut over = Vec::new();
    for (rho, n) in cases {
        let exact = roc_exact(rho, rho, n, &grid)?;
        let mut case_worst = 0.0f64;
        for p in &exact.points {
            let approx = roc_approx_clt(rho, rho, n, p.pfa)?;
            case_worst = case_worst.max((approx - p.pd).abs());
        }
        if case_worst > 0.05 {
            over.push(format!("rho = {rho}, N = {n}: {case_worst:.4}"));
        }
        worst = worst.max(case_worst);
    }
    Ok(Outcome {
        passed: worst <= 0.05,
        statistic: worst,
        tolerance: 0.05,
        detail: format!(
            "max |approx - exact| p_d over p_fa in [1e-4, 0.5], kappa = rho{}",
            if over.is_empty() {
                String::new()
            } else {
                format!("; exceeded at {}", over.join(", "))
            }
        ),
    })
}

fn d0_gap() -> Result<Outcome> {
    let grid = default_pfa_grid();
    let small = compare_d0_vs_optimal(0.05, 100, &grid)?;
    let large = compare_d0_vs_optimal(0.3, 100, &grid)?;
    let min_gap = small.min_gap().min(large.min_gap());
    let max_gap = small.max_gap();
    Ok(Outcome {
        passed: min_gap >= -1e-6 && max_gap <= 0.01,
        statistic: max_gap,
        tolerance: 0.01,
        detail: format!(
            "max gap at rho = 0.05, N = 100; min gap over rho in {{0.05, 0.3}}: {min_gap:.3e} (bound -1e-6); \
             max gap at rho = 0.3: {:.4}",
            large.max_gap()
        ),
    })
}

fn general_covariance(cfg: &ValidationConfig) -> Result<Outcome> {
    let (rho, phi, n) = (0.3, PI / 6.0, 20u32);
    let mut ks_ratio = 0.0f64;
    let mut ks_ok = true;
    for (i, sign) in [Sign::Qtms, Sign::NoiseRadar].into_iter().enumerate() {
        let cov = CovarianceSpec::new(2.0, 0.5, rho, phi, sign)?;
        let plan = TrialPlan::new(
            cov,
            DetectorSpec::new(0.0, n, detector_sign(cfg, sign))?,
            cfg.trials,
            cfg.seed.wrapping_add(1000 + i as u64),
        )?;
        let xs = sample_statistics(&plan, Hypothesis::Alt)?;
        let r = gof_test(&xs, &d0_general_law(&cov, n)?, cfg.alpha)?;
        ks_ratio = ks_ratio.max(r.ks_statistic / r.ks_critical);
        ks_ok &= r.passed;
    }

    // rescaling the channel powers must not move the D_0 ROC
    let grid = default_pfa_grid();
    let mut z = 0.0f64;
    let curves = [(1.0, 1.0, 1010u64), (2.0, 0.5, 1011)]
        .iter()
        .map(|&(s1, s2, off)| {
            let cov = CovarianceSpec::new(s1, s2, rho, phi, Sign::Qtms)?;
            let plan = TrialPlan::new(
                cov,
                DetectorSpec::new(0.0, n, Sign::Qtms)?,
                cfg.trials,
                cfg.seed.wrapping_add(off),
            )?;
            Ok(empirical_rocs(&plan, &[0.0], &grid)?.remove(0))
        })
        .collect::<Result<Vec<_>>>()?;
    let unit = CovarianceSpec::new(1.0, 1.0, rho, phi, Sign::Qtms)?;
    let alt = VgDensity::new(d0_general_law(&unit, n)?)?;
    let null = VgDensity::new(d0_general_law(&CovarianceSpec { rho: 0.0, ..unit }, n)?)?;
    for (a, b) in curves[0].points.iter().zip(&curves[1].points) {
        let t = null.isf(a.pfa)?;
        let pd = alt.sf(t)?;
        let se =
            empirical_se(pd, a.pfa, cfg.trials, slope(&null, &alt, t)).max(0.5 / cfg.trials as f64);
        z = z.max((a.pd - b.pd).abs() / (se * 2f64.sqrt()));
    }

    let mut phase_diff = 0.0f64;
    for &pfa in &grid {
        for &(r, p) in &[(0.3, phi), (0.5, 1.0), (0.9, 1.4), (0.2, -0.7)] {
            let a = roc0_approx(r, p, n, pfa)?;
            let b = roc0_approx(r * f64::cos(p), 0.0, n, pfa)?;
            phase_diff = phase_diff.max((a - b).abs());
        }
    }
    Ok(Outcome {
        passed: ks_ok && z <= cfg.se_multiplier && phase_diff == 0.0,
        statistic: ks_ratio,
        tolerance: 1.0,
        detail: format!(
            "worst KS / critical for D_0 under (2, 0.5, 0.3, pi/6, N = 20), both signs; \
             rescaled ROC difference {z:.2} se (bound {}); phase-law difference {phase_diff:e}",
            cfg.se_multiplier
        ),
    })
}

fn null_diagonal() -> Result<Outcome> {
    let grid = default_pfa_grid();
    let mut worst = 0.0f64;
    for kappa in tenths() {
        for n in [1u32, 10, 100] {
            for p in &roc_exact(0.0, kappa, n, &grid)?.points {
                worst = worst.max((p.pd - p.pfa).abs());
            }
            if kappa == 0.0 {
                for &pfa in &grid {
                    worst = worst.max((roc_approx_clt(0.0, 0.0, n, pfa)? - pfa).abs());
                    worst = worst.max((roc0_approx(0.0, 0.0, n, pfa)? - pfa).abs());
                }
            }
        }
    }
    Ok(at_most(
        worst,
        1e-9,
        "max |p_d - p_fa| at rho = 0, exact (kappa in {0, .., 0.9}, N in {1, 10, 100}) and approximate".into(),
    ))
}

fn llr_ordering(cfg: &ValidationConfig) -> Result<Outcome> {
    let (n, count) = (10u32, 10_000u64);
    let sign = Sign::Qtms;
    let cov = CovarianceSpec::simplified(0.3, sign)?;
    let key = StreamKey::from_seed(cfg.seed).derive(1200);
    let batches = (0..count)
        .map(|i| sample_batch(&cov, n as usize, &mut key.stream(i)))
        .collect::<Result<Vec<_>>>()?;
    let mut mismatches = 0usize;
    for kappa in [0.1, 0.5, 0.9] {
        let spec = DetectorSpec::new(kappa, n, sign)?;
        let mut by_stat: Vec<(f64, usize)> = Vec::with_capacity(batches.len());
        let mut by_llr: Vec<(f64, usize)> = Vec::with_capacity(batches.len());
        for (i, b) in batches.iter().enumerate() {
            by_stat.push((np_statistic(b, &spec)?, i));
            by_llr.push((llr(b, kappa, sign)?, i));
        }
        by_stat.sort_by(|a, b| a.0.total_cmp(&b.0));
        by_llr.sort_by(|a, b| a.0.total_cmp(&b.0));
        mismatches += by_stat
            .iter()
            .zip(&by_llr)
            .filter(|(a, b)| a.1 != b.1)
            .count();
    }
    Ok(at_most(
        mismatches as f64,
        0.0,
        format!("rank positions that differ between LLR and D_kappa orderings, {count} batches, kappa in {{0.1, 0.5, 0.9}}"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cheap_checks_pass() {
        let cfg = ValidationConfig::quick(1);
        for id in [1, 2, 4, 5, 12] {
            let r = run_check(id, &cfg).unwrap();
            assert!(r.passed, "{r:?}");
        }
        assert!(run_check(13, &cfg).is_err());
    }

    #[test]
    fn sign_mutation_is_caught() {
        let cfg = ValidationConfig {
            flip_detector_sign: true,
            ..ValidationConfig::quick(1)
        };
        assert!(!run_check(3, &cfg).unwrap().passed);
    }
}
