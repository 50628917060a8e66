//! Detection theory for noise-type radars (including QTMS radar).
//!
//! The Neyman-Pearson detector family `D_kappa = D_0 - kappa P_tot / 2`, its
//! exact variance-gamma sampling law, exact and large-N ROC curves, and a
//! Monte Carlo harness that checks the analytic results against simulation.
//!
//! ```
//! use nrdetect::{detector_law, roc_exact};
//!
//! let law = detector_law(0.3, 0.3, 50).unwrap();
//! assert!(law.mean().abs() < 1e-15);
//! let curve = roc_exact(0.3, 0.3, 50, &[1e-3, 1e-2, 1e-1]).unwrap();
//! assert!((curve.points[1].pd - 0.776).abs() < 1e-3);
//! ```

pub mod detector;
pub mod error;
pub mod montecarlo;
pub mod numerics;
pub mod rng;
pub mod roc;
pub mod signal;
pub mod validation;
pub mod vg;

pub use detector::{
    d0, decide, llr, log_likelihood, np_statistic, p_tot, DecisionOutcome, DetectorSpec,
};
pub use error::{Error, Result};
pub use montecarlo::{
    draw_vg, empirical_roc, empirical_rocs, gof_test, ks_critical_value, sample_statistics,
    sample_vg, GofReport, Hypothesis, TrialPlan,
};
pub use numerics::{
    bessel_k_half_integer, erfc, erfc_inv, integrate, ln_bessel_k_half_integer, QuadratureResult,
};
pub use rng::{RngStream, StreamKey};
pub use roc::{
    compare_d0_vs_optimal, default_pfa_grid, kappa_grid, log_pfa_grid, pd_exact, pd_vs_kappa,
    pfa_grid_below_one, rho_of_range, roc0_approx, roc_approx_clt, roc_approx_curve, roc_exact,
    D0Comparison, KappaSweep, RangeModel, RocCurve, RocMeta, RocMethod, RocPoint,
};
pub use signal::{
    build_covariance, quadratic_form_matrix, sample_batch, whitening_matrix,
    whitening_matrix_signed, CovarianceSpec, GaussianSampler, IqBatch, Sign,
};
pub use validation::{run_all, run_check, CheckResult, ValidationConfig, ValidationReport};
pub use vg::{
    d0_general_law, d0_general_law_uncorrelated_iq, detector_law, vg_cdf, vg_cf, vg_mean, vg_pdf,
    vg_quantile, vg_sf, vg_var, CdfPath, VgDensity, VgParams,
};
