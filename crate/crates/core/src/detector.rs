//! Detector statistics on IQ batches.
//!
//! Per sample, `P_tot = I1^2 + Q1^2 + I2^2 + Q2^2` and `D_0 = I1 I2 +- Q1 Q2`
//! (plus for a standard noise radar, minus for QTMS). Barred quantities are
//! means over the `N` samples of a batch; the Neyman-Pearson detector is
//! `D_kappa = D_0 - kappa P_tot / 2`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::pairwise_sum;
use crate::signal::{check_correlation, IqBatch, Sign};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub kappa: f64,
    /// Samples integrated per decision.
    pub n: u32,
    #[serde(default)]
    pub sign: Sign,
}

impl DetectorSpec {
    pub fn new(kappa: f64, n: u32, sign: Sign) -> Result<Self> {
        let spec = DetectorSpec { kappa, n, sign };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_correlation("kappa", self.kappa)?;
        if self.n == 0 {
            return Err(Error::domain("sample count N must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionOutcome {
    pub statistic: f64,
    pub threshold: f64,
    pub declared_target: bool,
}

#[inline]
fn row_power(r: &[f64; 4]) -> f64 {
    r[0] * r[0] + r[1] * r[1] + r[2] * r[2] + r[3] * r[3]
}

#[inline]
fn row_d0(r: &[f64; 4], q: f64) -> f64 {
    r[0] * r[2] + q * r[1] * r[3]
}

/// Mean total power over the batch.
pub fn p_tot(batch: &IqBatch) -> f64 {
    let rows = batch.rows();
    pairwise_sum(rows, row_power) / rows.len() as f64
}

/// Mean of `I1 I2 +- Q1 Q2` over the batch.
pub fn d0(batch: &IqBatch, sign: Sign) -> f64 {
    let q = sign.factor();
    let rows = batch.rows();
    pairwise_sum(rows, move |r| row_d0(r, q)) / rows.len() as f64
}

/// `D_0 - kappa P_tot / 2`. The batch must hold exactly `spec.n` rows.
pub fn np_statistic(batch: &IqBatch, spec: &DetectorSpec) -> Result<f64> {
    spec.validate()?;
    if batch.n() != spec.n as usize {
        return Err(Error::domain(format!(
            "batch has {} samples but the detector integrates N = {}",
            batch.n(),
            spec.n
        )));
    }
    Ok(d0(batch, spec.sign) - spec.kappa * p_tot(batch) / 2.0)
}

/// Exact joint log-density of the batch under the unit-power model with
/// correlation `rho`:
/// `-(N/2) [(P_tot - 2 rho D_0) / (1 - rho^2) + 2 ln(1 - rho^2) + 4 ln(2 pi)]`.
pub fn log_likelihood(batch: &IqBatch, rho: f64, sign: Sign) -> Result<f64> {
    check_correlation("rho", rho)?;
    let n = batch.n() as f64;
    let one_m = 1.0 - rho * rho;
    let quad = (p_tot(batch) - 2.0 * rho * d0(batch, sign)) / one_m;
    Ok(-0.5 * n * (quad + 2.0 * one_m.ln() + 4.0 * (2.0 * PI).ln()))
}

/// Log-likelihood ratio of correlation `kappa` against zero:
/// `N [(2 D_0 kappa - P_tot kappa^2) / (1 - kappa^2) - 2 ln(1 - kappa^2)]`,
/// which equals `(2 N kappa / (1 - kappa^2)) D_kappa - 2 N ln(1 - kappa^2)`.
pub fn llr(batch: &IqBatch, kappa: f64, sign: Sign) -> Result<f64> {
    check_correlation("kappa", kappa)?;
    let n = batch.n() as f64;
    let k2 = kappa * kappa;
    let ratio = (2.0 * d0(batch, sign) * kappa - p_tot(batch) * k2) / (1.0 - k2);
    Ok(n * (ratio - 2.0 * (-k2).ln_1p()))
}

/// Threshold test; a tie declares the target absent.
pub fn decide(statistic: f64, threshold: f64) -> DecisionOutcome {
    DecisionOutcome {
        statistic,
        threshold,
        declared_target: statistic > threshold,
    }
}
