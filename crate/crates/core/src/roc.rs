//! ROC curves: exact (through the variance-gamma law), large-N approximations,
//! kappa sweeps and the range model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{erfc, erfc_inv};
use crate::signal::{check_correlation, Sign};
use crate::vg::{detector_law, CdfPath, VgDensity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RocMethod {
    Exact,
    ApproxClt,
    Empirical,
}

impl RocMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            RocMethod::Exact => "exact",
            RocMethod::ApproxClt => "approx",
            RocMethod::Empirical => "empirical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub pfa: f64,
    pub pd: f64,
    /// Binomial standard error of `pd` (empirical curves only).
    pub stderr: Option<f64>,
    /// Decision threshold on the detector statistic, when one was computed.
    pub threshold: Option<f64>,
    /// Route taken by the detection-probability evaluation (exact curves only).
    pub path: Option<CdfPath>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocMeta {
    pub rho: f64,
    pub kappa: f64,
    pub n: u32,
    pub phi: f64,
    pub sign: Sign,
    pub seed: Option<u64>,
}

impl RocMeta {
    pub fn simple(rho: f64, kappa: f64, n: u32) -> Self {
        RocMeta {
            rho,
            kappa,
            n,
            phi: 0.0,
            sign: Sign::default(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub method: RocMethod,
    pub meta: RocMeta,
}

impl RocCurve {
    pub fn pfa(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.pfa).collect()
    }

    pub fn pd(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.pd).collect()
    }

    /// True if any point needed the gamma-difference CDF fallback.
    pub fn used_fallback(&self) -> bool {
        self.points
            .iter()
            .any(|p| p.path == Some(CdfPath::ChiSquareDifference))
    }
}

/// `points` false-alarm probabilities log-spaced from `min` to `max` inclusive.
pub fn log_pfa_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max < 1.0 && min <= max) {
        return Err(Error::domain(format!(
            "p_fa range must satisfy 0 < min <= max < 1, got [{min}, {max}]"
        )));
    }
    if points == 0 || (points == 1 && min != max) {
        return Err(Error::domain("a p_fa range needs at least two points"));
    }
    if points == 1 {
        return Ok(vec![min]);
    }
    let (a, b) = (min.log10(), max.log10());
    let step = (b - a) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            if i + 1 == points {
                max
            } else {
                10f64.powf(a + step * i as f64)
            }
        })
        .collect())
}

/// `points` values log-spaced over `[min, 1)`: the `points + 1` grid on `[min, 1]` without its endpoint.
pub fn pfa_grid_below_one(min: f64, points: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && min < 1.0) || points == 0 {
        return Err(Error::domain(format!(
            "need 0 < p_fa min < 1 and at least one point, got {min}, {points}"
        )));
    }
    let a = min.log10();
    Ok((0..points)
        .map(|i| 10f64.powf(a - a * i as f64 / points as f64))
        .collect())
}

/// 60 points log-spaced over `[1e-4, 1)`.
pub fn default_pfa_grid() -> Vec<f64> {
    pfa_grid_below_one(1e-4, 60).expect("valid default grid")
}

pub(crate) fn check_pfa_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::domain("p_fa grid is empty"));
    }
    if let Some(bad) = grid.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        return Err(Error::domain(format!(
            "p_fa values must lie in (0, 1), got {bad}"
        )));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("p_fa grid must be strictly increasing"));
    }
    Ok(())
}

/// Threshold and detection probability for one false-alarm level.
fn exact_point(null: &VgDensity, alt: &VgDensity, pfa: f64) -> Result<RocPoint> {
    let wrap = |e: Error| Error::GridPoint {
        pfa,
        source: Box::new(e),
    };
    let t = null.isf(pfa).map_err(wrap)?;
    let pd = alt.sf_with_path(t).map_err(wrap)?;
    Ok(RocPoint {
        pfa,
        pd: pd.value,
        stderr: None,
        threshold: Some(t),
        path: Some(pd.path),
    })
}

/// Exact ROC of `D_kappa` under true correlation `rho`.
///
/// At each `p_fa` the threshold is the upper `p_fa` point of the null law
/// (`rho = 0`) and `p_d` is the survival function of the alternative law there.
/// Grid points are evaluated in parallel and returned in input order.
pub fn roc_exact(rho: f64, kappa: f64, n: u32, pfa_grid: &[f64]) -> Result<RocCurve> {
    check_pfa_grid(pfa_grid)?;
    let null = VgDensity::new(detector_law(0.0, kappa, n)?)?;
    let alt = VgDensity::new(detector_law(rho, kappa, n)?)?;
    let points = pfa_grid
        .par_iter()
        .map(|&pfa| exact_point(&null, &alt, pfa))
        .collect::<Result<Vec<_>>>()?;
    Ok(RocCurve {
        points,
        method: RocMethod::Exact,
        meta: RocMeta::simple(rho, kappa, n),
    })
}

/// Exact detection probability at a single false-alarm level.
pub fn pd_exact(rho: f64, kappa: f64, n: u32, pfa: f64) -> Result<f64> {
    Ok(roc_exact(rho, kappa, n, &[pfa])?.points[0].pd)
}

fn check_pfa(pfa: f64) -> Result<()> {
    if pfa > 0.0 && pfa < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("p_fa must lie in (0, 1), got {pfa}")))
    }
}

/// Large-N ROC of `D_kappa`:
/// `p_d = erfc[(sqrt(1 + kappa^2) erfcinv(2 p_fa) - sqrt(N) rho) / sqrt((rho - kappa)^2 + (1 - rho kappa)^2)] / 2`.
pub fn roc_approx_clt(rho: f64, kappa: f64, n: u32, pfa: f64) -> Result<f64> {
    check_correlation("rho", rho)?;
    check_correlation("kappa", kappa)?;
    check_pfa(pfa)?;
    if n == 0 {
        return Err(Error::domain("sample count N must be at least 1"));
    }
    let z = erfc_inv(2.0 * pfa)?;
    let spread = ((rho - kappa).powi(2) + (1.0 - rho * kappa).powi(2)).sqrt();
    let arg = ((1.0 + kappa * kappa).sqrt() * z - (n as f64).sqrt() * rho) / spread;
    Ok(0.5 * erfc(arg))
}

/// [`roc_approx_clt`] over a grid.
pub fn roc_approx_curve(rho: f64, kappa: f64, n: u32, pfa_grid: &[f64]) -> Result<RocCurve> {
    check_pfa_grid(pfa_grid)?;
    let points = pfa_grid
        .iter()
        .map(|&pfa| {
            Ok(RocPoint {
                pfa,
                pd: roc_approx_clt(rho, kappa, n, pfa)?,
                stderr: None,
                threshold: None,
                path: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RocCurve {
        points,
        method: RocMethod::ApproxClt,
        meta: RocMeta::simple(rho, kappa, n),
    })
}

/// Large-N ROC of `D_0` under a phase offset `phi`:
/// `p_d = erfc[(erfcinv(2 p_fa) - sqrt(N) rho cos phi) / sqrt(1 + rho^2 cos^2 phi)] / 2`.
///
/// Depends on `(rho, phi)` only through `rho cos phi`.
pub fn roc0_approx(rho: f64, phi: f64, n: u32, pfa: f64) -> Result<f64> {
    check_correlation("rho", rho)?;
    check_pfa(pfa)?;
    if !phi.is_finite() {
        return Err(Error::domain("phase must be finite"));
    }
    if n == 0 {
        return Err(Error::domain("sample count N must be at least 1"));
    }
    let rc = rho * phi.cos();
    let z = erfc_inv(2.0 * pfa)?;
    Ok(0.5 * erfc((z - (n as f64).sqrt() * rc) / (1.0 + rc * rc).sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaSweep {
    pub rho: f64,
    pub n: u32,
    pub pfa: f64,
    pub kappa: Vec<f64>,
    pub pd: Vec<f64>,
    /// `pd / max(pd)`; equals 1 at the argmax.
    pub normalized: Vec<f64>,
    /// First grid kappa attaining the maximum.
    pub argmax_kappa: f64,
}

impl KappaSweep {
    /// `max - min` of the normalized values over grid points with `kappa <= upto`.
    pub fn spread(&self, upto: f64) -> f64 {
        let sel = self
            .kappa
            .iter()
            .zip(&self.normalized)
            .filter(|(k, _)| **k <= upto + 1e-12);
        let (lo, hi) = sel.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, v)| {
            (lo.min(*v), hi.max(*v))
        });
        hi - lo
    }
}

/// `kappa_i = i * step` for `i = 0, 1, ...` while below 1 (and at most `max` when given).
pub fn kappa_grid(step: f64, max: Option<f64>) -> Result<Vec<f64>> {
    if !(step > 0.0 && step < 1.0) {
        return Err(Error::domain(format!(
            "kappa step must lie in (0, 1), got {step}"
        )));
    }
    let limit = max.unwrap_or(1.0);
    let inv = 1.0 / step;
    let mut out = Vec::new();
    for i in 0.. {
        // divide by 1/step when that is an integer so 0.3 comes out as 30/100 exactly
        let k = if (inv - inv.round()).abs() < 1e-9 {
            i as f64 / inv.round()
        } else {
            i as f64 * step
        };
        if k >= 1.0 || k > limit + 1e-12 {
            break;
        }
        out.push(k);
    }
    Ok(out)
}

/// Exact `p_d` as a function of `kappa` at fixed `(rho, N, p_fa)`, normalized by its grid maximum.
pub fn pd_vs_kappa(rho: f64, n: u32, pfa: f64, kappa_grid: &[f64]) -> Result<KappaSweep> {
    check_correlation("rho", rho)?;
    check_pfa(pfa)?;
    if kappa_grid.is_empty() {
        return Err(Error::domain("kappa grid is empty"));
    }
    let pd = kappa_grid
        .par_iter()
        .map(|&k| pd_exact(rho, k, n, pfa))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, v) in pd.iter().enumerate() {
        if *v > pd[best] {
            best = i;
        }
    }
    let max = pd[best];
    let normalized = pd
        .iter()
        .map(|v| if max > 0.0 { v / max } else { 1.0 })
        .collect();
    Ok(KappaSweep {
        rho,
        n,
        pfa,
        kappa: kappa_grid.to_vec(),
        pd,
        normalized,
        argmax_kappa: kappa_grid[best],
    })
}

/// Correlation falling off with distance: `rho(R) = rho0 / sqrt(1 + (R / R_c)^4)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeModel {
    pub rho0: f64,
    /// Characteristic length, metres.
    pub rc: f64,
}

impl RangeModel {
    pub fn new(rho0: f64, rc: f64) -> Result<Self> {
        check_correlation("rho0", rho0)?;
        if !(rc > 0.0 && rc.is_finite()) {
            return Err(Error::domain(format!(
                "characteristic range must be positive, got {rc}"
            )));
        }
        Ok(RangeModel { rho0, rc })
    }
}

pub fn rho_of_range(model: &RangeModel, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::domain(format!("range must be nonnegative, got {r}")));
    }
    if r.is_infinite() {
        return Ok(0.0);
    }
    let x = r / model.rc;
    Ok(model.rho0 / (1.0 + x.powi(4)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct D0Comparison {
    /// `kappa = rho`.
    pub optimal: RocCurve,
    /// `kappa = 0`.
    pub d0: RocCurve,
    /// `optimal.pd - d0.pd` pointwise.
    pub gap: Vec<f64>,
}

impl D0Comparison {
    pub fn max_gap(&self) -> f64 {
        self.gap.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_gap(&self) -> f64 {
        self.gap.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn compare_d0_vs_optimal(rho: f64, n: u32, pfa_grid: &[f64]) -> Result<D0Comparison> {
    let optimal = roc_exact(rho, rho, n, pfa_grid)?;
    let d0 = roc_exact(rho, 0.0, n, pfa_grid)?;
    let gap = optimal
        .points
        .iter()
        .zip(&d0.points)
        .map(|(a, b)| a.pd - b.pd)
        .collect();
    Ok(D0Comparison { optimal, d0, gap })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let g = default_pfa_grid();
        assert_eq!(g.len(), 60);
        assert_eq!(g[0], 1e-4);
        assert!(*g.last().unwrap() < 1.0);
        assert!(check_pfa_grid(&g).is_ok());
        let g = log_pfa_grid(1e-3, 0.5, 7).unwrap();
        assert_eq!((g[0], g[6]), (1e-3, 0.5));
        assert!(log_pfa_grid(1e-3, 1.0, 7).is_err());
        assert!(check_pfa_grid(&[0.1, 0.1]).is_err());
        let k = kappa_grid(0.01, None).unwrap();
        assert_eq!(k.len(), 100);
        assert_eq!(k[30], 0.3);
        assert_eq!(kappa_grid(0.1, Some(0.6)).unwrap().len(), 7);
        assert!(kappa_grid(0.0, None).is_err());
    }

    #[test]
    fn null_is_diagonal() {
        let grid = default_pfa_grid();
        for kappa in [0.0, 0.2, 0.5, 0.9] {
            for n in [1, 10, 100] {
                let c = roc_exact(0.0, kappa, n, &grid).unwrap();
                for p in &c.points {
                    assert!(
                        (p.pd - p.pfa).abs() < 1e-9,
                        "kappa={kappa} N={n} pfa={}",
                        p.pfa
                    );
                }
            }
        }
        for &p in &grid {
            assert!((roc_approx_clt(0.0, 0.0, 7, p).unwrap() - p).abs() < 1e-12 * p);
        }
    }

    #[test]
    fn approx_value() {
        // erfcinv(0.02) = 1.6449763571331870, so the argument is
        // (sqrt(1.04) * 1.644976... - 2) / sqrt(0.96^2) = -0.33089...
        let v = roc_approx_clt(0.2, 0.2, 100, 0.01).unwrap();
        let arg = (1.04f64.sqrt() * 1.644_976_357_133_187 - 2.0) / 0.96;
        assert!((v - 0.5 * erfc(arg)).abs() < 1e-15);
        assert!((v - 0.6826).abs() < 1e-4, "{v}");
    }

    #[test]
    fn roc0_identities() {
        for &pfa in &[1e-4, 0.01, 0.3] {
            let v = roc0_approx(0.7, std::f64::consts::FRAC_PI_2, 40, pfa).unwrap();
            assert!((v - pfa).abs() < 1e-12);
            let phi = 0.6;
            let a = roc0_approx(0.5, phi, 40, pfa).unwrap();
            let b = roc0_approx(0.5 * phi.cos(), 0.0, 40, pfa).unwrap();
            assert!((a - b).abs() < 1e-15);
            let c = roc_approx_clt(0.4, 0.0, 40, pfa).unwrap();
            assert!((roc0_approx(0.4, 0.0, 40, pfa).unwrap() - c).abs() < 1e-14);
        }
    }

    #[test]
    fn optimal_kappa_dominates() {
        let grid = default_pfa_grid();
        let best = roc_exact(0.3, 0.3, 50, &grid).unwrap();
        for kappa in [0.0, 0.1, 0.2, 0.4, 0.5, 0.6] {
            let other = roc_exact(0.3, kappa, 50, &grid).unwrap();
            for (a, b) in best.points.iter().zip(&other.points) {
                assert!(a.pd >= b.pd - 1e-6);
            }
        }
        for w in best.points.windows(2) {
            assert!(w[1].pd >= w[0].pd - 1e-9);
        }
    }

    #[test]
    fn kappa_sweep_peaks_at_rho() {
        let grid = kappa_grid(0.01, None).unwrap();
        let s = pd_vs_kappa(0.1, 50, 0.01, &grid).unwrap();
        assert!((s.argmax_kappa - 0.1).abs() <= 0.01 + 1e-12);
        assert_eq!(s.normalized.iter().copied().fold(0.0, f64::max), 1.0);
    }

    #[test]
    fn range_model() {
        let m = RangeModel::new(0.5, 100.0).unwrap();
        assert_eq!(rho_of_range(&m, 0.0).unwrap(), 0.5);
        assert!((rho_of_range(&m, 100.0).unwrap() - 0.5 / 2f64.sqrt()).abs() < 1e-15);
        assert!((rho_of_range(&m, 1000.0).unwrap() - 0.5 / 10001f64.sqrt()).abs() < 1e-15);
        assert!((rho_of_range(&m, 1000.0).unwrap() - 0.0049998).abs() < 1e-7);
        assert!(RangeModel::new(1.0, 1.0).is_err());
        assert!(rho_of_range(&m, -1.0).is_err());
    }

    #[test]
    fn d0_comparison() {
        let grid = default_pfa_grid();
        let small = compare_d0_vs_optimal(0.05, 100, &grid).unwrap();
        let large = compare_d0_vs_optimal(0.3, 100, &grid).unwrap();
        assert!(small.min_gap() >= -1e-6 && large.min_gap() >= -1e-6);
        assert!(small.max_gap() <= 0.01);
        assert!(large.max_gap() > small.max_gap() && large.max_gap() <= 0.1);
    }

    #[test]
    fn errors_carry_grid_point() {
        assert!(roc_exact(0.2, 0.1, 5, &[0.5, 0.1]).is_err());
        assert!(roc_exact(0.2, 0.1, 5, &[]).is_err());
        assert!(roc_approx_clt(0.2, 0.1, 5, 1.0).is_err());
    }
}
