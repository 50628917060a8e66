//! Four-channel jointly Gaussian signal model `x = [I1, Q1, I2, Q2]`.
//!
//! Channel 1 is the received signal, channel 2 the retained reference. The
//! cross-covariance block is `rho * sigma1 * sigma2 * M(phi)` where `M` is a
//! rotation for standard noise radars and a reflection for QTMS radars.

use nalgebra::{Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Sign convention of the Q-channel cross term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Sign {
    /// `+` sign: standard noise radar, rotation block `R(phi)`.
    NoiseRadar,
    /// `-` sign: QTMS radar, reflection block `R'(phi)`.
    #[default]
    Qtms,
}

impl Sign {
    /// `+1` for noise radar, `-1` for QTMS.
    pub fn factor(self) -> f64 {
        match self {
            Sign::NoiseRadar => 1.0,
            Sign::Qtms => -1.0,
        }
    }
}

impl std::fmt::Display for Sign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sign::NoiseRadar => "noise-radar",
            Sign::Qtms => "qtms",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    /// Received-signal standard deviation (volts).
    pub sigma1: f64,
    /// Reference-signal standard deviation (volts).
    pub sigma2: f64,
    pub rho: f64,
    /// Phase shift between received and reference signals (radians).
    pub phi: f64,
    pub sign: Sign,
}

impl CovarianceSpec {
    pub fn new(sigma1: f64, sigma2: f64, rho: f64, phi: f64, sign: Sign) -> Result<Self> {
        let spec = CovarianceSpec {
            sigma1,
            sigma2,
            rho,
            phi,
            sign,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Unit powers and zero phase: the matrix `Sigma(rho)`.
    pub fn simplified(rho: f64, sign: Sign) -> Result<Self> {
        Self::new(1.0, 1.0, rho, 0.0, sign)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma1 > 0.0 && self.sigma1.is_finite())
            || !(self.sigma2 > 0.0 && self.sigma2.is_finite())
        {
            return Err(Error::domain(format!(
                "signal standard deviations must be positive, got ({}, {})",
                self.sigma1, self.sigma2
            )));
        }
        check_correlation("rho", self.rho)?;
        if !self.phi.is_finite() {
            return Err(Error::domain("phase must be finite"));
        }
        Ok(())
    }

    fn cross_block(&self) -> Matrix2<f64> {
        let (s, c) = self.phi.sin_cos();
        let m = match self.sign {
            Sign::NoiseRadar => Matrix2::new(c, s, -s, c),
            Sign::Qtms => Matrix2::new(c, s, s, -c),
        };
        m * (self.rho * self.sigma1 * self.sigma2)
    }
}

pub(crate) fn check_correlation(name: &str, value: f64) -> Result<()> {
    if !(0.0..1.0).contains(&value) {
        return Err(Error::domain(format!(
            "{name} must lie in [0, 1), got {value}"
        )));
    }
    Ok(())
}

/// Assembles the 4x4 covariance matrix of `[I1, Q1, I2, Q2]`.
pub fn build_covariance(spec: &CovarianceSpec) -> Result<Matrix4<f64>> {
    spec.validate()?;
    let cross = spec.cross_block();
    let mut m = Matrix4::zeros();
    let v1 = spec.sigma1 * spec.sigma1;
    let v2 = spec.sigma2 * spec.sigma2;
    m[(0, 0)] = v1;
    m[(1, 1)] = v1;
    m[(2, 2)] = v2;
    m[(3, 3)] = v2;
    m.fixed_view_mut::<2, 2>(0, 2).copy_from(&cross);
    m.fixed_view_mut::<2, 2>(2, 0).copy_from(&cross.transpose());
    Ok(m)
}

/// `N` i.i.d. rows `(I1, Q1, I2, Q2)`, stored row-contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct IqBatch {
    rows: Vec<[f64; 4]>,
}

impl IqBatch {
    pub fn new(rows: Vec<[f64; 4]>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::domain("an IQ batch needs at least one sample"));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::domain("IQ samples must be finite"));
        }
        Ok(IqBatch { rows })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[[f64; 4]] {
        &self.rows
    }
}

/// Draws Gaussian rows through the lower Cholesky factor of a covariance.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    factor: Matrix4<f64>,
}

impl GaussianSampler {
    pub fn new(spec: &CovarianceSpec) -> Result<Self> {
        let cov = build_covariance(spec)?;
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::domain("covariance is not positive definite"))?;
        Ok(GaussianSampler { factor: chol.l() })
    }

    /// One row; consumes exactly four uniforms from `rng`.
    #[inline]
    pub fn draw(&self, rng: &mut RngStream) -> [f64; 4] {
        let z = [
            rng.next_standard_normal(),
            rng.next_standard_normal(),
            rng.next_standard_normal(),
            rng.next_standard_normal(),
        ];
        let l = &self.factor;
        let mut x = [0.0; 4];
        for (i, xi) in x.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, zj) in z.iter().enumerate().take(i + 1) {
                acc += l[(i, j)] * zj;
            }
            *xi = acc;
        }
        x
    }

    pub fn sample(&self, n: usize, rng: &mut RngStream) -> Result<IqBatch> {
        IqBatch::new((0..n).map(|_| self.draw(rng)).collect())
    }
}

/// `n` rows drawn from `build_covariance(spec)`; deterministic given the stream.
pub fn sample_batch(spec: &CovarianceSpec, n: usize, rng: &mut RngStream) -> Result<IqBatch> {
    if n == 0 {
        return Err(Error::domain("batch size must be at least 1"));
    }
    GaussianSampler::new(spec)?.sample(n, rng)
}

/// Whitening matrix `B` for `Sigma(rho)` under the QTMS sign convention, with
/// `B Sigma B^T = 1`.
pub fn whitening_matrix(rho: f64) -> Result<Matrix4<f64>> {
    whitening_matrix_signed(rho, Sign::Qtms)
}

/// Whitening matrix for either sign convention. Its rows are the normalized
/// sum/difference channels, which also diagonalize every detector quadratic
/// form of the same sign.
pub fn whitening_matrix_signed(rho: f64, sign: Sign) -> Result<Matrix4<f64>> {
    check_correlation("rho", rho)?;
    let p = 1.0 / (2.0 * (1.0 + rho)).sqrt();
    let m = 1.0 / (2.0 * (1.0 - rho)).sqrt();
    let s = -sign.factor();
    #[rustfmt::skip]
    let b = Matrix4::new(
        p,   0.0, p,      0.0,
        0.0, p,   0.0,    -s * p,
        m,   0.0, -m,     0.0,
        0.0, m,   0.0,    s * m,
    );
    Ok(b)
}

/// Matrix `A` with `x^T A x = D0 - kappa * P_tot / 2` for a single sample.
pub fn quadratic_form_matrix(kappa: f64, sign: Sign) -> Result<Matrix4<f64>> {
    check_correlation("kappa", kappa)?;
    let k = -kappa;
    let q = sign.factor();
    #[rustfmt::skip]
    let a = Matrix4::new(
        k,   0.0, 1.0, 0.0,
        0.0, k,   0.0, q,
        1.0, 0.0, k,   0.0,
        0.0, q,   0.0, k,
    );
    Ok(a * 0.5)
}
