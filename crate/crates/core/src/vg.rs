//! The variance-gamma law `VG(c, sigma, theta, nu)` and the detector laws built on it.
//!
//! Density:
//!
//! ```text
//! f(x) = 2 exp(theta (x-c) / sigma^2) / (sigma sqrt(2 pi) nu^(1/nu) Gamma(1/nu))
//!        * (|x-c| / gamma)^(1/nu - 1/2) * K_{1/nu - 1/2}(gamma |x-c| / sigma^2),
//! gamma = sqrt(2 sigma^2 / nu + theta^2)
//! ```
//!
//! with characteristic function `e^{jct} (1 - j theta nu t + sigma^2 nu t^2 / 2)^(-1/nu)`.
//!
//! Only integer shapes `1/nu = N` are supported: the Bessel order is then the
//! half-integer `N - 1/2` and the density is a finite sum of exponential terms,
//! evaluated in log space. An equivalent representation, used as the CDF
//! fallback, is `X = c + a G1 - b G2` with `G1, G2 ~ Gamma(N, 1)` independent.
//!
//! The CDF has no closed form in general and is obtained by quadrature over
//! whichever side of the kink at `x = c` contains `x`, so the integrator never
//! straddles the derivative discontinuity.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::numerics::{
    half_integer_series_ln_coefficients, integrate_with, log_sum_exp, solve_bracketed, QuadOptions,
    RootOptions,
};
use crate::signal::{check_correlation, CovarianceSpec};

/// Absolute quadrature tolerance for CDF and survival evaluations.
pub const CDF_ABS_TOL: f64 = 1e-13;
/// Residual target `|F(x) - q|` for quantile searches.
pub const QUANTILE_TOL: f64 = 1e-12;
/// Half-width of the initial quantile bracket, in standard deviations.
pub const QUANTILE_BRACKET_SDS: f64 = 20.0;

const SHAPE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VgParams {
    /// Location.
    pub c: f64,
    /// Scale, `> 0`.
    pub sigma: f64,
    /// Asymmetry.
    pub theta: f64,
    /// Shape, `> 0`.
    pub nu: f64,
}

impl VgParams {
    pub fn new(c: f64, sigma: f64, theta: f64, nu: f64) -> Result<Self> {
        let p = VgParams {
            c,
            sigma,
            theta,
            nu,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.theta.is_finite()) {
            return Err(Error::domain("VG location and asymmetry must be finite"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::domain(format!(
                "VG sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::domain(format!(
                "VG nu must be positive, got {}",
                self.nu
            )));
        }
        Ok(())
    }

    /// `N = 1/nu` when it is a positive integer (within 1e-9 relative).
    pub fn integer_shape(&self) -> Result<u32> {
        self.validate()?;
        let inv = 1.0 / self.nu;
        let n = inv.round();
        if n >= 1.0 && n <= u32::MAX as f64 && (inv - n).abs() <= SHAPE_TOL * n {
            Ok(n as u32)
        } else {
            Err(Error::domain(format!(
                "only integer shapes 1/nu are supported (half-integer Bessel order), got 1/nu = {inv}"
            )))
        }
    }

    pub fn mean(&self) -> f64 {
        self.c + self.theta
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma + self.theta * self.theta * self.nu
    }

    /// Scales `(a, b)` of the representation `X - c = a G1 - b G2`,
    /// `G1, G2 ~ Gamma(1/nu, 1)`: `a - b = theta nu`, `a b = sigma^2 nu / 2`.
    pub fn gamma_difference_scales(&self) -> (f64, f64) {
        let drift = self.theta * self.nu;
        let root = (drift * drift + 2.0 * self.sigma * self.sigma * self.nu).sqrt();
        // b computed from the product to avoid cancellation when drift > 0
        if drift >= 0.0 {
            let a = 0.5 * (drift + root);
            (a, self.sigma * self.sigma * self.nu / (2.0 * a))
        } else {
            let b = 0.5 * (-drift + root);
            (self.sigma * self.sigma * self.nu / (2.0 * b), b)
        }
    }
}

/// `E[X] = c + theta`.
pub fn vg_mean(p: &VgParams) -> f64 {
    p.mean()
}

/// `Var[X] = sigma^2 + theta^2 nu`.
pub fn vg_var(p: &VgParams) -> f64 {
    p.variance()
}

/// Characteristic function.
pub fn vg_cf(t: f64, p: &VgParams) -> Complex64 {
    let w = Complex64::new(
        1.0 + p.sigma * p.sigma * p.nu * t * t / 2.0,
        -p.theta * p.nu * t,
    );
    // real part >= 1, so the principal log is continuous along the real t axis
    debug_assert!(w.re > 0.0);
    let exponent = Complex64::new(0.0, p.c * t) - w.ln() / p.nu;
    exponent.exp()
}

/// Which numerical route produced a probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CdfPath {
    /// Adaptive quadrature of the density.
    Quadrature,
    /// One-dimensional integral over the gamma-difference representation.
    ChiSquareDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probability {
    pub value: f64,
    pub path: CdfPath,
}

/// A VG law with everything that does not depend on `x` precomputed.
#[derive(Debug, Clone)]
pub struct VgDensity {
    params: VgParams,
    shape: u32,
    ln_norm: f64,
    alpha: f64,
    tilt: f64,
    /// `ln a_k - k ln(2 alpha)` for the Bessel series, k = 0..=N-1.
    ln_terms: Vec<f64>,
    sd: f64,
}

impl VgDensity {
    pub fn new(params: VgParams) -> Result<Self> {
        let shape = params.integer_shape()?;
        let n = shape - 1;
        let nf = shape as f64;
        let s2 = params.sigma * params.sigma;
        let nu = 1.0 / nf;
        let gamma = (2.0 * s2 / nu + params.theta * params.theta).sqrt();
        let alpha = gamma / s2;
        let ln_2alpha = (2.0 * alpha).ln();
        let ln_terms = half_integer_series_ln_coefficients(n)
            .into_iter()
            .enumerate()
            .map(|(k, ln_a)| ln_a - k as f64 * ln_2alpha)
            .collect();
        let order = n as f64 + 0.5;
        let ln_norm = 2f64.ln()
            - params.sigma.ln()
            - 0.5 * (2.0 * PI).ln()
            - nf * nu.ln()
            - ln_gamma(nf)
            - order * gamma.ln()
            + 0.5 * (PI / (2.0 * alpha)).ln();
        Ok(VgDensity {
            params,
            shape,
            ln_norm,
            alpha,
            tilt: params.theta / s2,
            ln_terms,
            sd: params.variance().sqrt(),
        })
    }

    pub fn params(&self) -> &VgParams {
        &self.params
    }

    /// `1/nu`.
    pub fn shape(&self) -> u32 {
        self.shape
    }

    pub fn sd(&self) -> f64 {
        self.sd
    }

    /// Log density. At `x = c` this is the finite limiting value.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        let u = x - self.params.c;
        let au = u.abs();
        let n = self.ln_terms.len() - 1;
        let series = if au == 0.0 {
            self.ln_terms[n]
        } else {
            let ln_u = au.ln();
            log_sum_exp(
                self.ln_terms
                    .iter()
                    .enumerate()
                    .map(|(k, &t)| t + (n - k) as f64 * ln_u),
            )
        };
        self.ln_norm + self.tilt * u - self.alpha * au + series
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    fn quad_options(&self) -> QuadOptions {
        QuadOptions {
            abs_tol: CDF_ABS_TOL,
            rel_tol: 1e-13,
            tail_scale: self.sd,
            ..QuadOptions::default()
        }
    }

    /// `P(X <= x)` by quadrature only.
    fn cdf_quadrature(&self, x: f64) -> Result<f64> {
        let c = self.params.c;
        let opts = self.quad_options();
        let f = |t: f64| self.pdf(t);
        if x <= c {
            Ok(integrate_with(f, f64::NEG_INFINITY, x, &opts)?.value)
        } else {
            Ok(1.0 - integrate_with(f, x, f64::INFINITY, &opts)?.value)
        }
    }

    /// `P(X > x)` by quadrature only.
    fn sf_quadrature(&self, x: f64) -> Result<f64> {
        let c = self.params.c;
        let opts = self.quad_options();
        let f = |t: f64| self.pdf(t);
        if x >= c {
            Ok(integrate_with(f, x, f64::INFINITY, &opts)?.value)
        } else {
            Ok(1.0 - integrate_with(f, f64::NEG_INFINITY, x, &opts)?.value)
        }
    }

    /// `P(X <= x)` (or `P(X > x)` when `upper`) through the gamma-difference
    /// representation: `E_{G2}[P(G1 <= (y + b G2) / a)]` with `y = x - c`.
    pub fn tail_chi_square(&self, x: f64, upper: bool) -> Result<f64> {
        let (a, b) = self.params.gamma_difference_scales();
        let n = self.shape as f64;
        let y = x - self.params.c;
        let ln_gamma_n = ln_gamma(n);
        let g0 = if y < 0.0 { -y / b } else { 0.0 };
        let integrand = |g: f64| {
            let s = (y + b * g) / a;
            if !(s > 0.0) {
                return if upper { 1.0 } else { 0.0 };
            }
            let density = ((n - 1.0) * g.ln() - g - ln_gamma_n).exp();
            let inner = if upper {
                gamma_ur(n, s)
            } else {
                gamma_lr(n, s)
            };
            density * inner
        };
        let opts = QuadOptions {
            abs_tol: CDF_ABS_TOL,
            rel_tol: 1e-12,
            tail_scale: n.sqrt(),
            // the mode of Gamma(N, 1) is N - 1
            breakpoints: vec![(n - 1.0).max(g0)],
            ..QuadOptions::default()
        };
        let body = integrate_with(integrand, g0, f64::INFINITY, &opts)?.value;
        // mass of G2 < g0, where the inner probability is exactly 1 (upper) or 0
        let head = if upper && g0 > 0.0 {
            gamma_lr(n, g0)
        } else {
            0.0
        };
        Ok((head + body).clamp(0.0, 1.0))
    }

    pub fn cdf_with_path(&self, x: f64) -> Result<Probability> {
        if x.is_nan() {
            return Err(Error::domain("CDF argument is NaN"));
        }
        if x == f64::INFINITY {
            return Ok(Probability {
                value: 1.0,
                path: CdfPath::Quadrature,
            });
        }
        if x == f64::NEG_INFINITY {
            return Ok(Probability {
                value: 0.0,
                path: CdfPath::Quadrature,
            });
        }
        match self.cdf_quadrature(x) {
            Ok(v) => Ok(Probability {
                value: v.clamp(0.0, 1.0),
                path: CdfPath::Quadrature,
            }),
            Err(e) if e.is_numerical() => Ok(Probability {
                value: self.tail_chi_square(x, false)?,
                path: CdfPath::ChiSquareDifference,
            }),
            Err(e) => Err(e),
        }
    }

    pub fn sf_with_path(&self, x: f64) -> Result<Probability> {
        if x.is_nan() {
            return Err(Error::domain("survival argument is NaN"));
        }
        if x.is_infinite() {
            return Ok(Probability {
                value: if x > 0.0 { 0.0 } else { 1.0 },
                path: CdfPath::Quadrature,
            });
        }
        match self.sf_quadrature(x) {
            Ok(v) => Ok(Probability {
                value: v.clamp(0.0, 1.0),
                path: CdfPath::Quadrature,
            }),
            Err(e) if e.is_numerical() => Ok(Probability {
                value: self.tail_chi_square(x, true)?,
                path: CdfPath::ChiSquareDifference,
            }),
            Err(e) => Err(e),
        }
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.cdf_with_path(x).map(|p| p.value)
    }

    pub fn sf(&self, x: f64) -> Result<f64> {
        self.sf_with_path(x).map(|p| p.value)
    }

    /// CDF at every point of an ascending slice, by accumulating the integral
    /// between consecutive points. Re-anchored periodically with a direct
    /// evaluation to keep drift negligible.
    pub fn cdf_sorted(&self, xs: &[f64]) -> Result<Vec<f64>> {
        const ANCHOR_EVERY: usize = 4096;
        if xs.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::domain("cdf_sorted requires ascending input"));
        }
        let opts = QuadOptions {
            abs_tol: 1e-15,
            rel_tol: 1e-12,
            breakpoints: vec![self.params.c],
            ..QuadOptions::default()
        };
        let f = |t: f64| self.pdf(t);
        let mut out = Vec::with_capacity(xs.len());
        let mut acc = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            if i % ANCHOR_EVERY == 0 {
                acc = self.cdf(x)?;
            } else {
                let prev = xs[i - 1];
                if x > prev {
                    acc += match integrate_with(f, prev, x, &opts) {
                        Ok(r) => r.value,
                        Err(e) if e.is_numerical() => self.cdf(x)? - self.cdf(prev)?,
                        Err(e) => return Err(e),
                    };
                }
            }
            out.push(acc.clamp(0.0, 1.0));
        }
        Ok(out)
    }

    fn solve_tail(&self, target: f64, upper: bool) -> Result<f64> {
        let mean = self.params.mean();
        // F(x) - q, or (1 - q) - S(x) when working in the upper tail; both increase in x.
        let g = |x: f64| -> Result<(f64, f64)> {
            let v = if upper {
                target - self.sf(x)?
            } else {
                self.cdf(x)? - target
            };
            Ok((v, self.pdf(x)))
        };
        let mut half_width = QUANTILE_BRACKET_SDS * self.sd;
        let mut attempt = 0;
        let (lo, hi) = loop {
            let (lo, hi) = (mean - half_width, mean + half_width);
            let f_lo = g(lo)?.0;
            let f_hi = g(hi)?.0;
            if f_lo <= 0.0 && f_hi >= 0.0 {
                break (lo, hi);
            }
            attempt += 1;
            if attempt > 6 {
                return Err(Error::Bracket(format!(
                    "could not bracket the {} probability {target} within mean +/- {half_width}",
                    if upper { "upper-tail" } else { "lower-tail" }
                )));
            }
            half_width *= 2.0;
        };
        let opts = RootOptions {
            x_tol: 1e-15,
            f_tol: QUANTILE_TOL,
            max_iter: 200,
        };
        // start from the normal approximation
        let z = crate::numerics::normal_quantile(if upper { 1.0 - target } else { target });
        solve_bracketed(g, lo, hi, Some(mean + self.sd * z), &opts)
    }

    /// Smallest `x` with `P(X <= x) = q`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::domain(format!(
                "quantile level must lie in (0, 1), got {q}"
            )));
        }
        if q > 0.5 {
            self.solve_tail(1.0 - q, true)
        } else {
            self.solve_tail(q, false)
        }
    }

    /// `x` with `P(X > x) = p` (inverse survival), accurate for small `p`.
    pub fn isf(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!(
                "tail probability must lie in (0, 1), got {p}"
            )));
        }
        if p < 0.5 {
            self.solve_tail(p, true)
        } else {
            self.solve_tail(1.0 - p, false)
        }
    }
}

pub fn vg_pdf(x: f64, p: &VgParams) -> Result<f64> {
    Ok(VgDensity::new(*p)?.pdf(x))
}

pub fn vg_cdf(x: f64, p: &VgParams) -> Result<f64> {
    VgDensity::new(*p)?.cdf(x)
}

pub fn vg_sf(x: f64, p: &VgParams) -> Result<f64> {
    VgDensity::new(*p)?.sf(x)
}

pub fn vg_quantile(q: f64, p: &VgParams) -> Result<f64> {
    VgDensity::new(*p)?.quantile(q)
}

/// Exact law of the detector `D_kappa` when the true correlation is `rho`:
/// `VG(0, sqrt(2 (1 - rho^2)(1 - kappa^2) / N), 2 (rho - kappa), 1/N)`.
pub fn detector_law(rho: f64, kappa: f64, n: u32) -> Result<VgParams> {
    check_correlation("rho", rho)?;
    check_correlation("kappa", kappa)?;
    if n == 0 {
        return Err(Error::domain("sample count N must be at least 1"));
    }
    let nf = n as f64;
    VgParams::new(
        0.0,
        (2.0 * (1.0 - rho * rho) * (1.0 - kappa * kappa) / nf).sqrt(),
        2.0 * (rho - kappa),
        1.0 / nf,
    )
}

/// Exact law of `D_0` under the general covariance (arbitrary powers and phase).
///
/// The quadratic form `D_0` has eigenvalues
/// `(sigma1 sigma2 / 2) (rho cos phi +- sqrt(1 - rho^2 sin^2 phi))`, each doubled,
/// which gives `VG(0, sigma1 sigma2 sqrt(2 (1 - rho^2) / N), 2 rho sigma1 sigma2 cos phi, 1/N)`
/// for either sign convention. For `sin phi = 0` it agrees with
/// [`d0_general_law_uncorrelated_iq`].
pub fn d0_general_law(cov: &CovarianceSpec, n: u32) -> Result<VgParams> {
    cov.validate()?;
    if n == 0 {
        return Err(Error::domain("sample count N must be at least 1"));
    }
    let nf = n as f64;
    let s12 = cov.sigma1 * cov.sigma2;
    let rho = cov.rho;
    VgParams::new(
        0.0,
        s12 * (2.0 * (1.0 - rho * rho) / nf).sqrt(),
        2.0 * rho * s12 * cov.phi.cos(),
        1.0 / nf,
    )
}

/// The form obtained by treating the in-phase and quadrature products as independent:
/// `VG(0, sigma1 sigma2 sqrt(2 (1 - rho^2 cos^2 phi) / N), 2 rho sigma1 sigma2 cos phi, 1/N)`.
///
/// `I1 I2` and `Q1 Q2` are only independent when
/// `sin phi = 0`; otherwise this variance is too large by
/// `2 (rho sigma1 sigma2 sin phi)^2 / N`. Kept for comparison.
pub fn d0_general_law_uncorrelated_iq(cov: &CovarianceSpec, n: u32) -> Result<VgParams> {
    cov.validate()?;
    if n == 0 {
        return Err(Error::domain("sample count N must be at least 1"));
    }
    let nf = n as f64;
    let s12 = cov.sigma1 * cov.sigma2;
    let rc = cov.rho * cov.phi.cos();
    VgParams::new(
        0.0,
        s12 * (2.0 * (1.0 - rc * rc) / nf).sqrt(),
        2.0 * rc * s12,
        1.0 / nf,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate, integrate_with, QuadOptions};
    use crate::signal::Sign;

    #[test]
    fn symmetric_when_theta_zero() {
        for n in [1u32, 2, 5, 30] {
            let p = VgParams::new(0.0, 0.8, 0.0, 1.0 / n as f64).unwrap();
            for i in 1..40 {
                let x = 0.1 * i as f64;
                let (l, r) = (vg_pdf(-x, &p).unwrap(), vg_pdf(x, &p).unwrap());
                assert!((l - r).abs() <= 1e-14 * r.max(1e-300));
            }
            assert!((vg_cdf(0.0, &p).unwrap() - 0.5).abs() < 1e-12);
            assert!(vg_quantile(0.5, &p).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn normalization_of_detector_law_n1() {
        let p = VgParams::new(0.0, (2.0f64 * 0.91).sqrt(), 0.6, 1.0).unwrap();
        assert_eq!(p, detector_law(0.3, 0.0, 1).unwrap());
        let d = VgDensity::new(p).unwrap();
        let opts = QuadOptions::default().with_breakpoints([0.0]);
        let total = integrate_with(|x| d.pdf(x), f64::NEG_INFINITY, f64::INFINITY, &opts).unwrap();
        assert!((total.value - 1.0).abs() < 1e-8);
        let p = VgParams::new(0.0, 1.0, 0.4, 0.2).unwrap();
        let d = VgDensity::new(p).unwrap();
        let total = integrate_with(|x| d.pdf(x), f64::NEG_INFINITY, f64::INFINITY, &opts).unwrap();
        assert!((total.value - 1.0).abs() < 1e-8);
        assert!((vg_cf(0.0, &p) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn n1_detector_law_is_asymmetric_laplace() {
        // N = 1: density is (1/gamma) exp(theta u / s^2 - gamma |u| / s^2)
        let p = detector_law(0.1, 0.6, 1).unwrap();
        let s2 = p.sigma * p.sigma;
        let g = (2.0 * s2 + p.theta * p.theta).sqrt();
        for i in -40..=40 {
            let x = 0.1 * i as f64;
            let want = (p.theta * x / s2 - g * x.abs() / s2).exp() / g;
            assert!((vg_pdf(x, &p).unwrap() - want).abs() < 1e-14);
        }
    }

    #[test]
    fn value_at_kink_is_the_limit() {
        for n in [1u32, 2, 7] {
            let p = detector_law(0.4, 0.1, n).unwrap();
            let d = VgDensity::new(p).unwrap();
            let at = d.pdf(0.0);
            assert!(at.is_finite() && at > 0.0);
            let near = 0.5 * (d.pdf(1e-9) + d.pdf(-1e-9));
            assert!((at - near).abs() < 1e-6 * at, "N={n}: {at} vs {near}");
        }
    }

    #[test]
    fn non_integer_shape_rejected() {
        let p = VgParams::new(0.0, 1.0, 0.0, 0.3).unwrap();
        assert!(matches!(vg_pdf(0.1, &p), Err(Error::Domain(_))));
        assert!(VgParams::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(VgParams::new(0.0, 1.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn moments() {
        let p = VgParams::new(0.0, 1.0, 0.4, 0.5).unwrap();
        assert!((vg_mean(&p) - 0.4).abs() < 1e-15);
        let p = VgParams::new(0.0, 0.5f64.sqrt(), 0.4, 0.1).unwrap();
        assert!((vg_var(&p) - 0.516).abs() < 1e-15);
    }

    #[test]
    fn quadrature_moments_match() {
        for n in [1u32, 5, 10, 20] {
            let p = detector_law(0.3, 0.3, n).unwrap();
            let d = VgDensity::new(p).unwrap();
            let opts = QuadOptions::default()
                .with_breakpoints([0.0])
                .with_tail_scale(d.sd());
            let m1 = integrate_with(|x| x * d.pdf(x), f64::NEG_INFINITY, f64::INFINITY, &opts)
                .unwrap()
                .value;
            let m2 = integrate_with(
                |x| x * x * d.pdf(x),
                f64::NEG_INFINITY,
                f64::INFINITY,
                &opts,
            )
            .unwrap()
            .value;
            assert!((m1 - vg_mean(&p)).abs() < 1e-6);
            assert!((m2 - m1 * m1 - vg_var(&p)).abs() < 1e-6, "N={n}");
        }
    }

    #[test]
    fn cf_hermitian_and_closed_form() {
        let (rho, kappa, n) = (0.5, 0.2, 3u32);
        let p = detector_law(rho, kappa, n).unwrap();
        let (cp, cm) = (0.6, 0.3);
        let nf = n as f64;
        for i in -20..=20 {
            let t = 0.5 * i as f64;
            let v = vg_cf(t, &p);
            assert!((v.conj() - vg_cf(-t, &p)).norm() < 1e-15);
            let base = Complex64::new(
                1.0 + 4.0 * cp * cm * t * t / (nf * nf),
                -2.0 * (rho - kappa) * t / nf,
            );
            let closed = base.powi(-(n as i32));
            assert!((v - closed).norm() < 1e-12);
        }
    }

    #[test]
    fn detector_law_values() {
        let p = detector_law(0.3, 0.1, 10).unwrap();
        assert!((p.sigma - (2.0f64 * 0.91 * 0.99 / 10.0).sqrt()).abs() < 1e-15);
        assert!((p.theta - 0.4).abs() < 1e-15);
        assert!((p.nu - 0.1).abs() < 1e-15);
        assert_eq!(detector_law(0.35, 0.35, 4).unwrap().theta, 0.0);
        assert!(detector_law(1.0, 0.0, 1).is_err());
        assert!(detector_law(0.2, 1.0, 1).is_err());
        assert!(detector_law(0.2, 0.1, 0).is_err());
    }

    #[test]
    fn detector_moment_identity() {
        for i in 0..10 {
            for j in 0..10 {
                let (rho, kappa) = (i as f64 / 10.0, j as f64 / 10.0);
                for n in [1u32, 7, 50] {
                    let p = detector_law(rho, kappa, n).unwrap();
                    assert!((p.mean() - 2.0 * (rho - kappa)).abs() < 1e-12);
                    let want = (2.0 * (rho - kappa).powi(2) + 2.0 * (1.0 - rho * kappa).powi(2))
                        / n as f64;
                    assert!((p.variance() - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn cdf_limits_and_monotone() {
        let p = detector_law(0.5, 0.1, 3).unwrap();
        let d = VgDensity::new(p).unwrap();
        assert_eq!(d.cdf(f64::NEG_INFINITY).unwrap(), 0.0);
        assert_eq!(d.cdf(f64::INFINITY).unwrap(), 1.0);
        assert!(d.cdf(-50.0).unwrap() < 1e-12);
        assert!(d.cdf(50.0).unwrap() > 1.0 - 1e-12);
        let mut prev = 0.0;
        for i in -300..=300 {
            let x = 0.01 * i as f64;
            let f = d.cdf(x).unwrap();
            assert!(f >= prev - 1e-14);
            assert!((f + d.sf(x).unwrap() - 1.0).abs() < 1e-12);
            prev = f;
        }
    }

    #[test]
    fn quadrature_and_chi_square_paths_agree() {
        for &(rho, kappa, n) in &[
            (0.3, 0.1, 1u32),
            (0.0, 0.3, 5),
            (0.8, 0.2, 20),
            (0.2, 0.2, 100),
            (0.3, 0.0, 200),
        ] {
            let d = VgDensity::new(detector_law(rho, kappa, n).unwrap()).unwrap();
            for k in -8..=8 {
                let x = d.params().mean() + 0.5 * k as f64 * d.sd();
                let q = d.cdf(x).unwrap();
                let c = d.tail_chi_square(x, false).unwrap();
                let s = d.tail_chi_square(x, true).unwrap();
                assert!(
                    (q - c).abs() < 1e-10,
                    "cdf rho={rho} kappa={kappa} N={n} x={x}: {q} vs {c}"
                );
                assert!((d.sf(x).unwrap() - s).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn quantile_round_trips() {
        for &(rho, kappa, n) in &[
            (0.0, 0.0, 1u32),
            (0.3, 0.1, 5),
            (0.0, 0.3, 50),
            (0.6, 0.0, 20),
        ] {
            let d = VgDensity::new(detector_law(rho, kappa, n).unwrap()).unwrap();
            for &q in &[1e-6, 1e-4, 0.01, 0.2, 0.5, 0.77, 0.99, 1.0 - 1e-5] {
                let x = d.quantile(q).unwrap();
                assert!((d.cdf(x).unwrap() - q).abs() < 1e-9, "q={q}");
            }
            for &p in &[1e-5, 1e-3, 0.3, 0.9] {
                let x = d.isf(p).unwrap();
                assert!((d.sf(x).unwrap() - p).abs() < 1e-12 + 1e-9 * p);
            }
            for k in -6..=6 {
                let x = d.params().mean() + 0.5 * k as f64 * d.sd();
                let back = d.quantile(d.cdf(x).unwrap()).unwrap();
                assert!((back - x).abs() < 1e-7);
            }
        }
        assert!(vg_quantile(0.0, &detector_law(0.1, 0.1, 1).unwrap()).is_err());
        assert!(vg_quantile(1.0, &detector_law(0.1, 0.1, 1).unwrap()).is_err());
    }

    #[test]
    fn large_n_quantile_versus_clt_formula() {
        // exact value from an independent chi-square-difference evaluation
        // (scipy quad + brentq), corroborated by 1e6 Gaussian-model draws (-0.137252)
        let t = vg_quantile(0.99, &detector_law(0.0, 0.3, 50).unwrap()).unwrap();
        assert!((t - (-0.13726801480051865)).abs() < 1e-8, "{t}");
        let clt = 2.0 * (1.09f64 / 50.0).sqrt() * crate::numerics::erfc_inv(0.02).unwrap() - 0.6;
        // skewness of the null law leaves a gap of about 0.023 at N = 50
        assert!(((t - clt).abs() - 0.0230).abs() < 1e-3);
    }

    #[test]
    fn cdf_sorted_matches_direct() {
        let d = VgDensity::new(detector_law(0.1, 0.6, 1).unwrap()).unwrap();
        let xs: Vec<f64> = (0..500).map(|i| -4.0 + 8.0 * i as f64 / 499.0).collect();
        let acc = d.cdf_sorted(&xs).unwrap();
        for (x, f) in xs.iter().zip(&acc) {
            assert!((d.cdf(*x).unwrap() - f).abs() < 1e-12);
        }
        assert!(d.cdf_sorted(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn split_domain_quadrature_matches_whole() {
        let d = VgDensity::new(detector_law(0.4, 0.0, 1).unwrap()).unwrap();
        let f = |x: f64| d.pdf(x);
        let left = integrate(f, f64::NEG_INFINITY, 0.0, 1e-13).unwrap();
        let right = integrate(f, 0.0, f64::INFINITY, 1e-13).unwrap();
        assert!((left.value + right.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn d0_general_reduces_to_detector_law() {
        for sign in [Sign::Qtms, Sign::NoiseRadar] {
            let cov = CovarianceSpec::new(1.0, 1.0, 0.35, 0.0, sign).unwrap();
            let g = d0_general_law(&cov, 12).unwrap();
            let d = detector_law(0.35, 0.0, 12).unwrap();
            assert!(
                (g.sigma - d.sigma).abs() < 1e-15
                    && (g.theta - d.theta).abs() < 1e-15
                    && g.nu == d.nu
            );
            let naive = d0_general_law_uncorrelated_iq(&cov, 12).unwrap();
            assert!((naive.sigma - g.sigma).abs() < 1e-15);
        }
        let cov =
            CovarianceSpec::new(2.0, 0.5, 0.3, std::f64::consts::FRAC_PI_2, Sign::Qtms).unwrap();
        assert!(d0_general_law(&cov, 20).unwrap().theta.abs() < 1e-15);
    }
}
