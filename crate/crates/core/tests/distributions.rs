//! The analytic laws against independent oracles: characteristic-function
//! inversion, the normal limit, and simulation of the Gaussian signal model.

use std::f64::consts::{FRAC_PI_3, PI};

use nrdetect::montecarlo::{ks_critical_value, ks_statistic, mean_var};
use nrdetect::numerics::{erfc, integrate};
use nrdetect::*;
use num_complex::Complex64;
use rayon::ThreadPoolBuilder;

/// `f(x) = (1/pi) int_0^T Re[e^{-itx} phi(t)] dt`, integrated period by period.
fn gil_pelaez_pdf(x: f64, cf: impl Fn(f64) -> Complex64, t_max: f64) -> f64 {
    let width = 1.0;
    let mut total = 0.0;
    let mut a = 0.0;
    while a < t_max {
        let f = |t: f64| (Complex64::new(0.0, -t * x).exp() * cf(t)).re;
        total += integrate(f, a, a + width, 1e-14).unwrap().value;
        a += width;
    }
    total / PI
}

#[test]
fn pdf_matches_fourier_inversion() {
    let grid: Vec<f64> = (0..=80).map(|i| -4.0 + 0.1 * i as f64).collect();
    // N = 1 decays like 1/t^2, so subtract a Laplace law with the same tail
    // and add its density back in closed form.
    for &(rho, kappa) in &[(0.1, 0.1), (0.5, 0.5), (0.8, 0.8), (0.1, 0.6)] {
        let law = detector_law(rho, kappa, 1).unwrap();
        let b2 = law.sigma * law.sigma / 2.0;
        let b = b2.sqrt();
        let remainder = |t: f64| vg_cf(t, &law) - Complex64::new(1.0 / (1.0 + b2 * t * t), 0.0);
        let mut worst = 0.0f64;
        for &x in &grid {
            let oracle = gil_pelaez_pdf(x, remainder, 2000.0) + (-x.abs() / b).exp() / (2.0 * b);
            worst = worst.max((vg_pdf(x, &law).unwrap() - oracle).abs());
        }
        assert!(worst <= 1e-6, "rho={rho} kappa={kappa}: {worst}");
    }
    for &(rho, kappa, n) in &[(0.3, 0.3, 5u32), (0.1, 0.9, 5), (0.5, 0.2, 3)] {
        let law = detector_law(rho, kappa, n).unwrap();
        let mut worst = 0.0f64;
        for &x in &grid {
            let oracle = gil_pelaez_pdf(x, |t| vg_cf(t, &law), 400.0);
            worst = worst.max((vg_pdf(x, &law).unwrap() - oracle).abs());
        }
        assert!(worst <= 1e-6, "rho={rho} kappa={kappa} N={n}: {worst}");
    }
}

fn kolmogorov_distance_to_normal(n: u32) -> f64 {
    let law = detector_law(0.3, 0.3, n).unwrap();
    let d = VgDensity::new(law).unwrap();
    let sd = law.variance().sqrt();
    (-600..=600)
        .map(|i| {
            let x = law.mean() + 0.01 * i as f64 * sd;
            let phi = 0.5 * erfc(-(x - law.mean()) / (sd * 2f64.sqrt()));
            (d.cdf(x).unwrap() - phi).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn law_approaches_normal() {
    let dist: Vec<f64> = [1, 5, 10, 20]
        .iter()
        .map(|&n| kolmogorov_distance_to_normal(n))
        .collect();
    assert!(dist.windows(2).all(|w| w[1] < w[0]), "{dist:?}");
}

#[test]
fn cdf_matches_simulation_at_deciles() {
    let plan = TrialPlan::new(
        CovarianceSpec::simplified(0.0, Sign::Qtms).unwrap(),
        DetectorSpec::new(0.0, 5, Sign::Qtms).unwrap(),
        1_000_000,
        11,
    )
    .unwrap();
    let mut xs = sample_statistics(&plan, Hypothesis::Alt).unwrap();
    xs.sort_by(f64::total_cmp);
    let law = detector_law(0.0, 0.0, 5).unwrap();
    for i in 1..10 {
        let q = i as f64 / 10.0;
        let x = vg_quantile(q, &law).unwrap();
        let emp = xs.partition_point(|v| *v <= x) as f64 / xs.len() as f64;
        assert!(
            (emp - vg_cdf(x, &law).unwrap()).abs() < 2e-3,
            "decile {q}: {emp}"
        );
    }
}

#[test]
fn empirical_roc_matches_exact() {
    let grid = default_pfa_grid();
    for &(rho, n, seed) in &[(0.2, 100u32, 21u64), (0.3, 50, 22)] {
        let plan = TrialPlan::new(
            CovarianceSpec::simplified(rho, Sign::Qtms).unwrap(),
            DetectorSpec::new(rho, n, Sign::Qtms).unwrap(),
            100_000,
            seed,
        )
        .unwrap();
        let emp = empirical_roc(&plan, &grid).unwrap();
        let exact = roc_exact(rho, rho, n, &grid).unwrap();
        let null = VgDensity::new(detector_law(0.0, rho, n).unwrap()).unwrap();
        let alt = VgDensity::new(detector_law(rho, rho, n).unwrap()).unwrap();
        for (e, m) in exact.points.iter().zip(&emp.points) {
            // binomial error of p_d plus the threshold's own sampling error
            let t = e.threshold.unwrap();
            let slope = alt.pdf(t) / null.pdf(t);
            let se = ((e.pd * (1.0 - e.pd) + slope * slope * e.pfa * (1.0 - e.pfa)) / 1e5).sqrt();
            assert!(
                (m.pd - e.pd).abs() <= 3.0 * se.max(5e-6),
                "rho={rho} pfa={}: {} vs {}",
                e.pfa,
                m.pd,
                e.pd
            );
        }
    }
}

#[test]
fn self_consistent_ks_calibration() {
    let law = detector_law(0.5, 0.2, 1).unwrap();
    let passes = (0..100u64)
        .filter(|&rep| {
            let xs = sample_vg(&law, 100_000, 1000 + rep).unwrap();
            gof_test(&xs, &law, 0.01).unwrap().passed
        })
        .count();
    assert!(passes >= 98, "{passes} of 100");
}

#[test]
fn sign_conventions_give_the_same_law() {
    let draws = |sign: Sign, seed: u64| {
        let plan = TrialPlan::new(
            CovarianceSpec::simplified(0.4, sign).unwrap(),
            DetectorSpec::new(0.2, 3, sign).unwrap(),
            100_000,
            seed,
        )
        .unwrap();
        let mut xs = sample_statistics(&plan, Hypothesis::Alt).unwrap();
        xs.sort_by(f64::total_cmp);
        xs
    };
    let a = draws(Sign::Qtms, 31);
    let b = draws(Sign::NoiseRadar, 32);
    // two-sample KS over the pooled sample
    let mut d = 0.0f64;
    for x in a.iter().chain(&b) {
        let fa = a.partition_point(|v| v <= x) as f64 / a.len() as f64;
        let fb = b.partition_point(|v| v <= x) as f64 / b.len() as f64;
        d = d.max((fa - fb).abs());
    }
    let crit = ks_critical_value(0.01, 1).unwrap() * (2.0 / 1e5f64).sqrt();
    assert!(d < crit, "{d} vs {crit}");
    let law = detector_law(0.4, 0.2, 3).unwrap();
    assert!(gof_test(&a, &law, 0.01).unwrap().passed);
    assert!(gof_test(&b, &law, 0.01).unwrap().passed);
}

#[test]
fn general_covariance_law_and_the_uncorrelated_iq_form() {
    for sign in [Sign::Qtms, Sign::NoiseRadar] {
        let cov = CovarianceSpec::new(2.0, 0.5, 0.9, FRAC_PI_3, sign).unwrap();
        let plan =
            TrialPlan::new(cov, DetectorSpec::new(0.0, 5, sign).unwrap(), 100_000, 41).unwrap();
        let xs = sample_statistics(&plan, Hypothesis::Alt).unwrap();
        let exact = d0_general_law(&cov, 5).unwrap();
        let naive = d0_general_law_uncorrelated_iq(&cov, 5).unwrap();
        assert!(gof_test(&xs, &exact, 0.01).unwrap().passed);
        assert!(!gof_test(&xs, &naive, 0.01).unwrap().passed);
        // the discrepancy is entirely in the spread
        let (m, v) = mean_var(&xs);
        assert!((m - exact.mean()).abs() < 4.0 * (v / 1e5).sqrt());
        assert!((v / exact.variance() - 1.0).abs() < 0.02);
        assert!(naive.variance() / exact.variance() > 1.5);
    }
}

#[test]
fn draws_do_not_depend_on_thread_count() {
    let plan = TrialPlan::new(
        CovarianceSpec::new(1.5, 0.7, 0.35, 0.4, Sign::NoiseRadar).unwrap(),
        DetectorSpec::new(0.25, 7, Sign::NoiseRadar).unwrap(),
        5_000,
        51,
    )
    .unwrap();
    let run = |threads: usize| {
        ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sample_statistics(&plan, Hypothesis::Alt).unwrap())
    };
    let one: Vec<u64> = run(1).iter().map(|v| v.to_bits()).collect();
    let four: Vec<u64> = run(4).iter().map(|v| v.to_bits()).collect();
    assert_eq!(one, four);
}

#[test]
fn ks_statistic_of_perfect_fit_is_half_step() {
    let n = 10;
    let f: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    assert!((ks_statistic(&f) - 0.05).abs() < 1e-15);
}
