//! Monte Carlo harness: detector draws, empirical ROC curves and
//! Kolmogorov-Smirnov goodness of fit against the analytic laws.
//!
//! Trial `i` of a hypothesis always reads random stream `i` of a key derived
//! from `(seed, hypothesis)`, so results do not depend on thread count or
//! evaluation order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{d0, p_tot, DetectorSpec};
use crate::error::{Error, Result};
use crate::numerics::pairwise_sum;
use crate::rng::{RngStream, StreamKey};
use crate::roc::{check_pfa_grid, RocCurve, RocMeta, RocMethod, RocPoint};
use crate::signal::{CovarianceSpec, GaussianSampler};
use crate::vg::{VgDensity, VgParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    /// Target absent, `rho = 0`.
    Null,
    /// Target present.
    Alt,
}

impl Hypothesis {
    fn tag(self) -> u64 {
        match self {
            Hypothesis::Null => 0,
            Hypothesis::Alt => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub cov_null: CovarianceSpec,
    pub cov_alt: CovarianceSpec,
    pub detector: DetectorSpec,
    pub trials: usize,
    pub seed: u64,
}

impl TrialPlan {
    /// Unit-power plan: the null covariance is the alternative with `rho = 0`.
    pub fn new(
        cov_alt: CovarianceSpec,
        detector: DetectorSpec,
        trials: usize,
        seed: u64,
    ) -> Result<Self> {
        let cov_null = CovarianceSpec {
            rho: 0.0,
            ..cov_alt
        };
        let plan = TrialPlan {
            cov_null,
            cov_alt,
            detector,
            trials,
            seed,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        self.cov_null.validate()?;
        self.cov_alt.validate()?;
        self.detector.validate()?;
        if self.cov_null.rho != 0.0 {
            return Err(Error::domain("the null covariance must have rho = 0"));
        }
        if self.trials == 0 {
            return Err(Error::domain("at least one trial is required"));
        }
        Ok(())
    }

    fn cov(&self, h: Hypothesis) -> &CovarianceSpec {
        match h {
            Hypothesis::Null => &self.cov_null,
            Hypothesis::Alt => &self.cov_alt,
        }
    }
}

/// Per-trial sufficient statistics `(D_0, P_tot)`, batch means.
pub fn sample_sufficient(plan: &TrialPlan, hypothesis: Hypothesis) -> Result<Vec<(f64, f64)>> {
    plan.validate()?;
    let sampler = GaussianSampler::new(plan.cov(hypothesis))?;
    let key = StreamKey::from_seed(plan.seed).derive(hypothesis.tag());
    let n = plan.detector.n as usize;
    let sign = plan.detector.sign;
    (0..plan.trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = key.stream(i);
            let batch = sampler.sample(n, &mut rng)?;
            Ok((d0(&batch, sign), p_tot(&batch)))
        })
        .collect()
}

/// `trials` realizations of `D_kappa` under the chosen hypothesis.
pub fn sample_statistics(plan: &TrialPlan, hypothesis: Hypothesis) -> Result<Vec<f64>> {
    let kappa = plan.detector.kappa;
    Ok(sample_sufficient(plan, hypothesis)?
        .into_iter()
        .map(|(d, p)| d - kappa * p / 2.0)
        .collect())
}

/// One variance-gamma draw through `X = c + a G1 - b G2`. Integer shapes only:
/// each `Gamma(N, 1)` is a sum of `N` unit exponentials.
pub fn draw_vg(law: &VgParams, rng: &mut RngStream) -> Result<f64> {
    let shape = law.integer_shape()?;
    let (a, b) = law.gamma_difference_scales();
    let mut gamma = || (0..shape).map(|_| -rng.next_uniform().ln()).sum::<f64>();
    let g1 = gamma();
    let g2 = gamma();
    Ok(law.c + a * g1 - b * g2)
}

/// `count` independent draws from `law`, trial `i` on stream `i`.
pub fn sample_vg(law: &VgParams, count: usize, seed: u64) -> Result<Vec<f64>> {
    law.integer_shape()?;
    let key = StreamKey::from_seed(seed).derive(2);
    (0..count as u64)
        .into_par_iter()
        .map(|i| draw_vg(law, &mut key.stream(i)))
        .collect()
}

/// Nearest-rank empirical quantile of an ascending sample: `sorted[ceil(q n) - 1]`.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = (q * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Fraction of an ascending sample strictly above `t`.
fn fraction_above(sorted: &[f64], t: f64) -> f64 {
    let at_or_below = sorted.partition_point(|x| *x <= t);
    (sorted.len() - at_or_below) as f64 / sorted.len() as f64
}

fn roc_from_samples(null: &[f64], alt: &[f64], pfa_grid: &[f64], meta: RocMeta) -> RocCurve {
    let n = alt.len() as f64;
    let points = pfa_grid
        .iter()
        .map(|&pfa| {
            let t = nearest_rank(null, 1.0 - pfa);
            let pd = fraction_above(alt, t);
            RocPoint {
                pfa,
                pd,
                stderr: Some((pd * (1.0 - pd) / n).sqrt()),
                threshold: Some(t),
                path: None,
            }
        })
        .collect();
    RocCurve {
        points,
        method: RocMethod::Empirical,
        meta,
    }
}

fn empirical_meta(plan: &TrialPlan, kappa: f64) -> RocMeta {
    RocMeta {
        rho: plan.cov_alt.rho,
        kappa,
        n: plan.detector.n,
        phi: plan.cov_alt.phi,
        sign: plan.detector.sign,
        seed: Some(plan.seed),
    }
}

/// Empirical ROC: thresholds are nearest-rank `(1 - p_fa)` quantiles of the
/// null draws, `p_d` is the fraction of alternative draws above them, and each
/// point carries the binomial standard error `sqrt(p_d (1 - p_d) / trials)`.
pub fn empirical_roc(plan: &TrialPlan, pfa_grid: &[f64]) -> Result<RocCurve> {
    check_pfa_grid(pfa_grid)?;
    let null = sorted(sample_statistics(plan, Hypothesis::Null)?);
    let alt = sorted(sample_statistics(plan, Hypothesis::Alt)?);
    Ok(roc_from_samples(
        &null,
        &alt,
        pfa_grid,
        empirical_meta(plan, plan.detector.kappa),
    ))
}

/// Empirical ROCs for several `kappa` from one set of draws; the plan's own
/// kappa is ignored.
pub fn empirical_rocs(plan: &TrialPlan, kappas: &[f64], pfa_grid: &[f64]) -> Result<Vec<RocCurve>> {
    check_pfa_grid(pfa_grid)?;
    for &k in kappas {
        DetectorSpec {
            kappa: k,
            ..plan.detector
        }
        .validate()?;
    }
    let null = sample_sufficient(plan, Hypothesis::Null)?;
    let alt = sample_sufficient(plan, Hypothesis::Alt)?;
    let stat = |v: &[(f64, f64)], k: f64| sorted(v.iter().map(|(d, p)| d - k * p / 2.0).collect());
    Ok(kappas
        .iter()
        .map(|&k| {
            roc_from_samples(
                &stat(&null, k),
                &stat(&alt, k),
                pfa_grid,
                empirical_meta(plan, k),
            )
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub ks_statistic: f64,
    pub ks_critical: f64,
    pub alpha: f64,
    pub sample_size: usize,
    pub passed: bool,
}

/// `P(K > c)` for the Kolmogorov distribution.
fn kolmogorov_sf(c: f64) -> f64 {
    if c <= 0.0 {
        return 1.0;
    }
    if c < 0.2 {
        // the alternating series converges slowly here and the value is 1 to double precision
        return 1.0;
    }
    let terms = (1..=100).map(|k| {
        let kf = k as f64;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        sign * (-2.0 * kf * kf * c * c).exp()
    });
    (2.0 * terms.sum::<f64>()).clamp(0.0, 1.0)
}

/// Asymptotic two-sided KS critical value `c(alpha) / sqrt(n)`.
pub fn ks_critical_value(alpha: f64, n: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if n == 0 {
        return Err(Error::domain("KS test needs at least one sample"));
    }
    let (mut lo, mut hi) = (0.2, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_sf(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi) / (n as f64).sqrt())
}

/// Two-sided KS statistic of a sample against a continuous CDF evaluated at the sorted sample.
pub fn ks_statistic(cdf_at_sorted: &[f64]) -> f64 {
    let n = cdf_at_sorted.len() as f64;
    cdf_at_sorted
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Kolmogorov-Smirnov test of `samples` against the VG law `law` at level `alpha`.
pub fn gof_test(samples: &[f64], law: &VgParams, alpha: f64) -> Result<GofReport> {
    if samples.is_empty() {
        return Err(Error::domain("KS test needs at least one sample"));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("samples must be finite"));
    }
    let density = VgDensity::new(*law)?;
    let xs = sorted(samples.to_vec());
    let cdf = density.cdf_sorted(&xs)?;
    let ks = ks_statistic(&cdf);
    let crit = ks_critical_value(alpha, xs.len())?;
    Ok(GofReport {
        ks_statistic: ks,
        ks_critical: crit,
        alpha,
        sample_size: xs.len(),
        passed: ks < crit,
    })
}

/// Sample mean and unbiased variance, pairwise-summed.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs, |x| *x) / n;
    let var = pairwise_sum(xs, |x| (x - mean) * (x - mean)) / (n - 1.0).max(1.0);
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Sign;
    use crate::vg::detector_law;

    fn plan(rho: f64, kappa: f64, n: u32, trials: usize, seed: u64) -> TrialPlan {
        TrialPlan::new(
            CovarianceSpec::simplified(rho, Sign::Qtms).unwrap(),
            DetectorSpec::new(kappa, n, Sign::Qtms).unwrap(),
            trials,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn deterministic_draws() {
        let p = plan(0.3, 0.1, 4, 1, 42);
        let a = sample_statistics(&p, Hypothesis::Alt).unwrap();
        assert_eq!(a, sample_statistics(&p, Hypothesis::Alt).unwrap());
        // trial i does not depend on how many trials there are
        let longer = sample_statistics(&TrialPlan { trials: 50, ..p }, Hypothesis::Alt).unwrap();
        assert_eq!(a[0].to_bits(), longer[0].to_bits());
        assert_ne!(a, sample_statistics(&p, Hypothesis::Null).unwrap());
    }

    #[test]
    fn plan_validation() {
        let mut p = plan(0.3, 0.1, 4, 10, 1);
        p.cov_null.rho = 0.1;
        assert!(p.validate().is_err());
        assert!(TrialPlan::new(
            CovarianceSpec::simplified(0.3, Sign::Qtms).unwrap(),
            DetectorSpec::new(0.1, 4, Sign::Qtms).unwrap(),
            0,
            1
        )
        .is_err());
    }

    #[test]
    fn alt_moments() {
        let xs = sample_statistics(&plan(0.3, 0.0, 10, 100_000, 3), Hypothesis::Alt).unwrap();
        let (m, v) = mean_var(&xs);
        assert!((m - 0.6).abs() < 3.0 * (v / xs.len() as f64).sqrt());
        let xs = sample_statistics(&plan(0.3, 0.1, 10, 100_000, 4), Hypothesis::Alt).unwrap();
        let (_, v) = mean_var(&xs);
        let want = (2.0 * 0.04 + 2.0 * 0.97f64.powi(2)) / 10.0;
        assert!((v / want - 1.0).abs() < 0.05);
    }

    #[test]
    fn nearest_rank_definition() {
        let s: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        assert_eq!(nearest_rank(&s, 0.9), 9.0);
        assert_eq!(nearest_rank(&s, 0.91), 10.0);
        assert_eq!(nearest_rank(&s, 0.0), 1.0);
        assert_eq!(fraction_above(&s, 9.0), 0.1);
    }

    #[test]
    fn null_alt_equal_gives_diagonal() {
        let grid = [0.01, 0.05, 0.1, 0.3, 0.6];
        let c = empirical_roc(&plan(0.0, 0.2, 10, 20_000, 5), &grid).unwrap();
        for p in &c.points {
            let se = (p.pfa * (1.0 - p.pfa) / 20_000.0).sqrt();
            assert!((p.pd - p.pfa).abs() <= 3.0 * se * 2f64.sqrt(), "{p:?}");
        }
    }

    #[test]
    fn stderr_scaling() {
        let grid = [0.05, 0.2];
        let a = empirical_roc(&plan(0.2, 0.2, 20, 10_000, 6), &grid).unwrap();
        let b = empirical_roc(&plan(0.2, 0.2, 20, 40_000, 6), &grid).unwrap();
        let c = empirical_roc(&plan(0.2, 0.2, 20, 20_000, 6), &grid).unwrap();
        for i in 0..grid.len() {
            let (sa, sb, sc) = (
                a.points[i].stderr.unwrap(),
                b.points[i].stderr.unwrap(),
                c.points[i].stderr.unwrap(),
            );
            // binomial scaling: 4x trials halves the error, 2x divides it by sqrt(2)
            assert!((sb / sa - 0.5).abs() < 0.1);
            assert!((sc / sa - 0.5f64.sqrt()).abs() < 0.15);
        }
    }

    #[test]
    fn reuse_across_kappa_matches_single() {
        let grid = [0.01, 0.1];
        let p = plan(0.3, 0.2, 8, 2_000, 7);
        let many = empirical_rocs(&p, &[0.0, 0.2], &grid).unwrap();
        let one = empirical_roc(&p, &grid).unwrap();
        assert_eq!(many[1].points, one.points);
        assert_eq!(many[1].meta.kappa, 0.2);
    }

    #[test]
    fn critical_values() {
        // inverse Kolmogorov survival function from scipy.special.kolmogi
        assert!((ks_critical_value(0.05, 1).unwrap() - 1.3580986393225507).abs() < 1e-9);
        assert!((ks_critical_value(0.01, 1).unwrap() - 1.6276236115189504).abs() < 1e-9);
        assert!((ks_critical_value(0.01, 10_000).unwrap() - 0.016276236115189504).abs() < 1e-11);
        assert!(ks_critical_value(0.0, 10).is_err());
    }

    #[test]
    fn ks_bounds() {
        let law = detector_law(0.2, 0.1, 1).unwrap();
        let r = gof_test(&[0.3], &law, 0.01).unwrap();
        assert!(r.ks_statistic >= 0.0 && r.ks_statistic <= 1.0);
        assert_eq!(r.sample_size, 1);
        assert!(gof_test(&[], &law, 0.01).is_err());
    }

    #[test]
    fn vg_draws_match_law() {
        let law = detector_law(0.5, 0.1, 3).unwrap();
        let xs = sample_vg(&law, 100_000, 8).unwrap();
        let (m, v) = mean_var(&xs);
        assert!((m - law.mean()).abs() < 4.0 * (v / 1e5).sqrt());
        assert!((v / law.variance() - 1.0).abs() < 0.03);
        assert!(gof_test(&xs, &law, 0.01).unwrap().passed);
    }

    #[test]
    fn gaussian_with_matched_moments_is_rejected() {
        let law = detector_law(0.8, 0.0, 1).unwrap();
        let key = StreamKey::from_seed(9);
        let sd = law.variance().sqrt();
        let xs: Vec<f64> = (0..100_000)
            .map(|i| law.mean() + sd * key.stream(i).next_standard_normal())
            .collect();
        assert!(!gof_test(&xs, &law, 0.01).unwrap().passed);
    }
}
