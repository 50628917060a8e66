//! Special functions and numerical primitives shared by the rest of the crate.
//!
//! Everything here is a pure function of its arguments:
//!
//! * modified Bessel functions of the second kind at half-integer order, via the
//!   terminating series, in direct and log form;
//! * `erfc` and its inverse;
//! * the standard normal quantile (Wichura's AS241), used both as the starting
//!   point for `erfc_inv` and for inverse-CDF Gaussian sampling;
//! * globally adaptive Gauss-Kronrod quadrature over finite, semi-infinite and
//!   infinite ranges, with caller-supplied breakpoints;
//! * a bracketed, bisection-safeguarded Newton solver.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{FRAC_2_SQRT_PI, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default absolute tolerance of [`integrate`].
pub const QUAD_ABS_TOL: f64 = 1e-12;
/// Default relative tolerance of [`integrate`].
pub const QUAD_REL_TOL: f64 = 1e-12;
/// Default cap on the number of subintervals kept by the adaptive integrator.
pub const QUAD_MAX_SUBDIVISIONS: usize = 2000;
/// Target on `|erfc(x) - y|` used by [`erfc_inv`].
pub const ERFC_INV_RESIDUAL_TOL: f64 = 1e-14;

/// Outcome of a numerical integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    /// Absolute error estimate, always `>= 0`.
    pub error_estimate: f64,
    /// Number of integrand evaluations, always `>= 1`.
    pub evaluations: usize,
}

// ---------------------------------------------------------------------------
// Bessel K at half-integer order

/// `ln a_k` for the coefficients `a_k = (n+k)! / (k! (n-k)!)` of the
/// terminating half-integer Bessel series, `k = 0..=n`.
pub(crate) fn half_integer_series_ln_coefficients(n: u32) -> Vec<f64> {
    let n = n as usize;
    let mut out = Vec::with_capacity(n + 1);
    let mut ln_a = 0.0;
    out.push(ln_a);
    for k in 0..n {
        ln_a += ((n + k + 1) as f64).ln() + ((n - k) as f64).ln() - ((k + 1) as f64).ln();
        out.push(ln_a);
    }
    out
}

/// `ln(sum_i exp(x_i))`, stable for large magnitudes.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.into_iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `ln K_{n+1/2}(z)`.
///
/// Uses `K_{n+1/2}(z) = sqrt(pi/(2z)) e^{-z} sum_{k=0}^{n} (n+k)!/(k!(n-k)!) (2z)^{-k}`
/// with every term accumulated in log space, so the result stays finite far
/// beyond the point where `K` itself under- or overflows.
pub fn ln_bessel_k_half_integer(n: u32, z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::domain(format!(
            "Bessel K requires finite z > 0, got {z}"
        )));
    }
    let ln_2z = (2.0 * z).ln();
    let coeffs = half_integer_series_ln_coefficients(n);
    let series = log_sum_exp(
        coeffs
            .iter()
            .enumerate()
            .map(|(k, &ln_a)| ln_a - k as f64 * ln_2z),
    );
    Ok(0.5 * (PI / (2.0 * z)).ln() - z + series)
}

/// `K_{n+1/2}(z)`, the modified Bessel function of the second kind of order `n + 1/2`.
pub fn bessel_k_half_integer(n: u32, z: f64) -> Result<f64> {
    ln_bessel_k_half_integer(n, z).map(f64::exp)
}

// ---------------------------------------------------------------------------
// Error function family

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Quantile of the standard normal distribution (Wichura, AS241 / PPND16).
///
/// Relative accuracy is about 1e-16 over the whole of `(0, 1)`. Returns
/// `-inf`/`+inf` at 0 and 1 and NaN outside `[0, 1]`.
pub fn normal_quantile(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((r * 2509.0809287301226727 + 33430.575583588128105) * r
            + 67265.770927008700853)
            * r
            + 45921.953931549871457)
            * r
            + 13731.693765509461125)
            * r
            + 1971.5909503065514427)
            * r
            + 133.14166789178437745)
            * r
            + 3.387132872796366608;
        let den = ((((((r * 5226.495278852545925 + 28729.085735721942674) * r
            + 39307.89580009271061)
            * r
            + 21213.794301586595867)
            * r
            + 5394.1960214247511077)
            * r
            + 687.1870074920579083)
            * r
            + 42.313330701600911252)
            * r
            + 1.0;
        return q * num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((r * 7.7454501427834140764e-4 + 0.0227238449892691845833) * r
            + 0.24178072517745061177)
            * r
            + 1.27045825245236838258)
            * r
            + 3.64784832476320460504)
            * r
            + 5.7694972214606914055)
            * r
            + 4.6303378461565452959)
            * r
            + 1.42343711074968357734;
        let den = ((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * r
            + 0.0151986665636164571966)
            * r
            + 0.14810397642748007459)
            * r
            + 0.68976733498510000455)
            * r
            + 1.6763848301838038494)
            * r
            + 2.05319162663775882187)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * r
            + 0.0012426609473880784386)
            * r
            + 0.026532189526576123093)
            * r
            + 0.29656057182850489123)
            * r
            + 1.7848265399172913358)
            * r
            + 5.4637849111641143699)
            * r
            + 6.6579046435011037772;
        let den = ((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * r
            + 1.8463183175100546818e-5)
            * r
            + 7.868691311456132591e-4)
            * r
            + 0.0148753612908506148525)
            * r
            + 0.13692988092273580531)
            * r
            + 0.59983220655588793769)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Inverse of [`erfc`] on `(0, 2)`.
///
/// Starts from the AS241 normal quantile and polishes with bracketed Newton
/// iterations on `erfc` itself.
pub fn erfc_inv(y: f64) -> Result<f64> {
    if !(y > 0.0 && y < 2.0) {
        return Err(Error::domain(format!(
            "erfc_inv requires y in (0, 2), got {y}"
        )));
    }
    if y == 1.0 {
        return Ok(0.0);
    }
    // 2 - y is exact for y in [1, 2).
    if y > 1.0 {
        return erfc_inv(2.0 - y).map(|x| -x);
    }
    let half = if y / 2.0 > 0.0 { y / 2.0 } else { y };
    let guess = -normal_quantile(half) / SQRT_2;
    let hi = (-y.ln()).sqrt() + 1.0;
    let opts = RootOptions {
        x_tol: 4.0 * f64::EPSILON,
        f_tol: ERFC_INV_RESIDUAL_TOL.min(1e-3 * y),
        max_iter: 100,
    };
    solve_bracketed(
        |x| Ok((erfc(x) - y, -FRAC_2_SQRT_PI * (-x * x).exp())),
        0.0,
        hi,
        Some(guess),
        &opts,
    )
}

// ---------------------------------------------------------------------------
// Root finding

/// Stopping rules for [`solve_bracketed`].
#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    /// Relative step / bracket width at which iteration stops.
    pub x_tol: f64,
    /// Absolute residual at which iteration stops.
    pub f_tol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions {
            x_tol: 1e-15,
            f_tol: 1e-12,
            max_iter: 200,
        }
    }
}

/// Finds a root of `f` inside `[lo, hi]` by Newton's method, falling back to
/// bisection whenever a Newton step would leave the current bracket.
///
/// `f` returns `(value, derivative)`. `f(lo)` and `f(hi)` must have opposite signs.
pub fn solve_bracketed<F>(
    mut f: F,
    lo: f64,
    hi: f64,
    x0: Option<f64>,
    opts: &RootOptions,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
{
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let (f_lo, _) = f(lo)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    let (f_hi, _) = f(hi)?;
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::Bracket(format!(
            "no sign change on [{lo}, {hi}]: f = ({f_lo}, {f_hi})"
        )));
    }
    let lo_sign = f_lo.signum();
    let mut x = match x0 {
        Some(g) if g > lo && g < hi => g,
        _ => 0.5 * (lo + hi),
    };
    for _ in 0..opts.max_iter {
        let (fx, dfx) = f(x)?;
        if fx.abs() <= opts.f_tol {
            return Ok(x);
        }
        if fx.signum() == lo_sign {
            lo = x;
        } else {
            hi = x;
        }
        let mid = 0.5 * (lo + hi);
        let newton = x - fx / dfx;
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            mid
        };
        let scale = x.abs().max(1.0);
        if (next - x).abs() <= opts.x_tol * scale || (hi - lo) <= opts.x_tol * scale {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Bracket(format!(
        "no convergence after {} iterations, bracket [{lo}, {hi}]",
        opts.max_iter
    )))
}

// ---------------------------------------------------------------------------
// Quadrature

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Options for [`integrate_with`].
#[derive(Debug, Clone)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    /// Points where the integrand is known to be non-smooth. Each one strictly
    /// inside the range becomes a subinterval boundary; an infinite range is
    /// always cut at its first breakpoint (or 0 when none is given).
    pub breakpoints: Vec<f64>,
    /// Length scale of the `x = a + s(1-t)/t` map used on infinite tails.
    pub tail_scale: f64,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: QUAD_ABS_TOL,
            rel_tol: QUAD_REL_TOL,
            max_subdivisions: QUAD_MAX_SUBDIVISIONS,
            breakpoints: Vec::new(),
            tail_scale: 1.0,
        }
    }
}

impl QuadOptions {
    pub fn with_abs_tol(mut self, tol: f64) -> Self {
        self.abs_tol = tol;
        self
    }

    pub fn with_breakpoints(mut self, points: impl IntoIterator<Item = f64>) -> Self {
        self.breakpoints = points.into_iter().collect();
        self
    }

    pub fn with_tail_scale(mut self, scale: f64) -> Self {
        self.tail_scale = scale;
        self
    }
}

#[derive(Debug, Clone, Copy)]
enum Piece {
    Finite,
    /// `[origin, inf)` via `x = origin + s (1 - t) / t`, `t in (0, 1]`.
    Upper {
        origin: f64,
        scale: f64,
    },
    /// `(-inf, origin]` via `x = origin - s (1 - t) / t`.
    Lower {
        origin: f64,
        scale: f64,
    },
}

impl Piece {
    fn eval<F: Fn(f64) -> f64>(&self, f: &F, t: f64) -> f64 {
        match *self {
            Piece::Finite => f(t),
            Piece::Upper { origin, scale } | Piece::Lower { origin, scale } => {
                if t <= 0.0 {
                    return 0.0;
                }
                let offset = scale * (1.0 - t) / t;
                let x = match self {
                    Piece::Upper { .. } => origin + offset,
                    _ => origin - offset,
                };
                if !x.is_finite() {
                    return 0.0;
                }
                let v = f(x) * scale / (t * t);
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    piece: usize,
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// One 15-point Kronrod rule on `[lo, hi]` with the QUADPACK error estimate.
fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let f_center = f(center);
    let mut result_gauss = f_center * WG[3];
    let mut result_kronrod = f_center * WGK[7];
    let mut result_abs = result_kronrod.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        result_kronrod += WGK[j] * (f1 + f2);
        result_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            result_gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = result_kronrod * 0.5;
    let mut result_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        result_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = result_kronrod * half;
    let result_abs = result_abs * half.abs();
    let result_asc = result_asc * half.abs();
    let mut err = ((result_kronrod - result_gauss) * half).abs();
    if result_asc != 0.0 && err != 0.0 {
        err = result_asc * (200.0 * err / result_asc).powf(1.5).min(1.0);
    }
    if result_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * result_abs);
    }
    (result, err)
}

/// Integrates `f` over `(a, b)` (either end may be infinite) to `abs_tol`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
) -> Result<QuadratureResult> {
    if !(abs_tol > 0.0) {
        return Err(Error::domain(format!(
            "abs_tol must be positive, got {abs_tol}"
        )));
    }
    integrate_with(f, a, b, &QuadOptions::default().with_abs_tol(abs_tol))
}

/// Globally adaptive Gauss-Kronrod integration of `f` over `(a, b)`.
///
/// Converges when the summed error estimate is at most
/// `max(abs_tol, rel_tol * |value|)`. On budget exhaustion the partial result
/// is returned inside [`Error::Quadrature`].
pub fn integrate_with<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<QuadratureResult> {
    if a.is_nan() || b.is_nan() {
        return Err(Error::domain("integration bounds must not be NaN"));
    }
    if a == b {
        return Ok(QuadratureResult {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 1,
        });
    }
    if a > b {
        return integrate_with(f, b, a, opts).map(|r| QuadratureResult {
            value: -r.value,
            ..r
        });
    }
    if !(opts.tail_scale > 0.0) {
        return Err(Error::domain("tail_scale must be positive"));
    }

    let mut cuts: Vec<f64> = opts
        .breakpoints
        .iter()
        .copied()
        .filter(|p| p.is_finite() && *p > a && *p < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    if a.is_infinite() && b.is_infinite() && cuts.is_empty() {
        cuts.push(0.0);
    }

    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(a);
    edges.extend(cuts);
    edges.push(b);

    let scale = opts.tail_scale;
    let mut pieces = Vec::new();
    let mut initial = Vec::new();
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (piece, t_lo, t_hi) = match (lo.is_infinite(), hi.is_infinite()) {
            (false, false) => (Piece::Finite, lo, hi),
            (true, false) => (Piece::Lower { origin: hi, scale }, 0.0, 1.0),
            (false, true) => (Piece::Upper { origin: lo, scale }, 0.0, 1.0),
            (true, true) => unreachable!("infinite range is always cut"),
        };
        pieces.push(piece);
        initial.push((pieces.len() - 1, t_lo, t_hi));
    }

    let mut evaluations = 0usize;
    let mut heap = BinaryHeap::new();
    let eval_segment = |piece: usize, lo: f64, hi: f64, evaluations: &mut usize| {
        let p = pieces[piece];
        let g = |t: f64| p.eval(&f, t);
        let (value, error) = gauss_kronrod_15(&g, lo, hi);
        *evaluations += 15;
        Segment {
            piece,
            lo,
            hi,
            value,
            error,
        }
    };
    for (piece, lo, hi) in initial {
        heap.push(eval_segment(piece, lo, hi, &mut evaluations));
    }

    loop {
        let value: f64 = heap.iter().map(|s| s.value).sum();
        let error: f64 = heap.iter().map(|s| s.error).sum();
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        let result = QuadratureResult {
            value,
            error_estimate: error,
            evaluations,
        };
        if !value.is_finite() {
            return Err(Error::Quadrature { partial: result });
        }
        if error <= target {
            return Ok(result);
        }
        if heap.len() >= opts.max_subdivisions {
            return Err(Error::Quadrature { partial: result });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // Cannot subdivide further in floating point.
            heap.push(worst);
            return Err(Error::Quadrature { partial: result });
        }
        heap.push(eval_segment(worst.piece, worst.lo, mid, &mut evaluations));
        heap.push(eval_segment(worst.piece, mid, worst.hi, &mut evaluations));
    }
}

// ---------------------------------------------------------------------------
// Summation

/// Pairwise (cascade) sum of `f(item)` over a slice.
pub fn pairwise_sum<T, F: Fn(&T) -> f64 + Copy>(items: &[T], f: F) -> f64 {
    const BLOCK: usize = 32;
    if items.len() <= BLOCK {
        return items.iter().map(f).sum();
    }
    let (left, right) = items.split_at(items.len() / 2);
    pairwise_sum(left, f) + pairwise_sum(right, f)
}
