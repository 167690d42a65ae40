//! End-to-end private mean estimators.
//!
//! * [`dp_robust_mean`]: filtered mean under gamma-corruption plus Gaussian
//!   noise calibrated to the dimension-free error bound.
//! * [`dp_mean`]: the same with `gamma = 1/n`, i.e. robust only to the one
//!   record that differs between adjacent datasets.
//! * [`dp_winsorized_mean`]: clamp to a known range, winsorize each
//!   coordinate, add Gaussian noise with the range-based sensitivity. Its
//!   noise grows with `sqrt(d)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::filter::{filter_gaussian_unknown_mean, FilterDiagnostics};
use crate::linalg::Vector;
use crate::privacy::{add_gaussian_noise, noise_scale, PrivacyParams};
use crate::scalar::Real;
use crate::sensitivity::{RobustConfig, SensitivityBound};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DpRobust,
    DpPlain,
    DpWinsorized,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::DpRobust, Method::DpPlain, Method::DpWinsorized];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::DpRobust => "dp_robust",
            Method::DpPlain => "dp_plain",
            Method::DpWinsorized => "dp_winsorized",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown method {s:?}")))
    }
}

/// Whether non-private intermediate values are attached to a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReleaseMode {
    /// Only the noised mean and public calibration values.
    #[default]
    Release,
    /// Also the pre-noise mean and filter diagnostics. NOT private.
    Diagnostic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WinsorizeConfig<T: Real> {
    /// Fraction trimmed into the quantile on each side, in `(0, 0.5)`.
    pub alpha: T,
    /// Known bound `R`: data is assumed to lie in `[-R, R]` per coordinate.
    pub range_bound: T,
}

impl<T: Real> Default for WinsorizeConfig<T> {
    fn default() -> Self {
        WinsorizeConfig {
            alpha: T::lit(0.05),
            range_bound: T::lit(10.0),
        }
    }
}

impl<T: Real> WinsorizeConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero() && self.alpha < T::lit(0.5)) {
            return Err(Error::domain(format!("alpha must lie in (0, 0.5), got {}", self.alpha)));
        }
        if !(self.range_bound > T::zero() && self.range_bound.is_finite()) {
            return Err(Error::domain(format!(
                "range bound must be positive, got {}",
                self.range_bound
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport<T: Real> {
    pub method: Method,
    pub private_mean: Vector<T>,
    /// Pre-noise estimate; present only in diagnostic mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub robust_mean: Option<Vector<T>>,
    pub noise_variance: T,
    /// Error bound the sensitivity was derived from (for the winsorized
    /// baseline, the per-coordinate range `R`).
    pub bound_used: T,
    pub sensitivity_used: T,
    pub params: PrivacyParams<T>,
    /// Present only in diagnostic mode, and only for filter-based methods.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter_diag: Option<FilterDiagnostics<T>>,
    pub seed: u64,
    pub warnings: Vec<String>,
}

impl<T: Real> EstimateReport<T> {
    pub fn noise_sigma(&self) -> T {
        self.noise_variance.sqrt()
    }
}

fn release_filtered<T: Real>(
    method: Method,
    data: &Dataset<T>,
    cfg: &RobustConfig<T>,
    bound: SensitivityBound<T>,
    epsilon: T,
    seed: u64,
    mode: ReleaseMode,
) -> Result<EstimateReport<T>> {
    let params = PrivacyParams::new(epsilon, cfg.tau)?;
    let outcome = filter_gaussian_unknown_mean(data, cfg)?;
    let spec = noise_scale(bound.l2_sensitivity, &params, seed)?;
    let private_mean = add_gaussian_noise(&outcome.mean, &spec);

    let mut warnings = params.warnings();
    warnings.extend(outcome.diagnostics.warnings.iter().cloned());
    let diagnostic = mode == ReleaseMode::Diagnostic;
    Ok(EstimateReport {
        method,
        private_mean,
        robust_mean: diagnostic.then_some(outcome.mean),
        noise_variance: spec.variance,
        bound_used: bound.robust_error,
        sensitivity_used: bound.l2_sensitivity,
        params,
        filter_diag: diagnostic.then_some(outcome.diagnostics),
        seed,
        warnings,
    })
}

/// Private robust mean of a gamma-corrupted sample, in release mode.
pub fn dp_robust_mean<T: Real>(
    data: &Dataset<T>,
    cfg: &RobustConfig<T>,
    epsilon: T,
    seed: u64,
) -> Result<EstimateReport<T>> {
    dp_robust_mean_with(data, cfg, epsilon, seed, ReleaseMode::Release)
}

/// Noise variance is `8 ln(1.25/tau) / epsilon^2 * bound^2`, with `bound`
/// the gamma-dependent error bound.
pub fn dp_robust_mean_with<T: Real>(
    data: &Dataset<T>,
    cfg: &RobustConfig<T>,
    epsilon: T,
    seed: u64,
    mode: ReleaseMode,
) -> Result<EstimateReport<T>> {
    cfg.validate()?;
    let bound = SensitivityBound::for_gamma(cfg.gamma, cfg.c_thresh)?;
    release_filtered(Method::DpRobust, data, cfg, bound, epsilon, seed, mode)
}

/// Private mean with the filter run at `gamma = 1/n`, in release mode.
pub fn dp_mean<T: Real>(data: &Dataset<T>, tau: T, c_thresh: T, epsilon: T, seed: u64) -> Result<EstimateReport<T>> {
    dp_mean_with(data, tau, c_thresh, epsilon, seed, ReleaseMode::Release)
}

pub fn dp_mean_with<T: Real>(
    data: &Dataset<T>,
    tau: T,
    c_thresh: T,
    epsilon: T,
    seed: u64,
    mode: ReleaseMode,
) -> Result<EstimateReport<T>> {
    let n = data.n();
    if n < 3 {
        return Err(Error::domain(format!("dp_mean needs n >= 3, got {n}")));
    }
    let cfg = RobustConfig::new(T::one() / T::from_usize(n).unwrap(), tau, c_thresh)?;
    let bound = SensitivityBound::for_single_point(n, c_thresh)?;
    release_filtered(Method::DpPlain, data, &cfg, bound, epsilon, seed, mode)
}

/// Per-coordinate clamp to `[-R, R]` followed by winsorization at the
/// empirical `alpha` and `1 - alpha` order statistics: with `k =
/// floor(alpha n)`, the `k` smallest values are raised to the `k`-th order
/// statistic and the `k` largest lowered to the `(n - 1 - k)`-th.
pub fn winsorized_mean<T: Real>(data: &Dataset<T>, wcfg: &WinsorizeConfig<T>) -> Result<Vector<T>> {
    wcfg.validate()?;
    let n = data.n();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let r = wcfg.range_bound;
    let k = (wcfg.alpha * T::from_usize(n).unwrap()).floor().to_usize().unwrap_or(0);
    let n_t = T::from_usize(n).unwrap();
    let means = (0..data.d())
        .map(|j| {
            let mut col: Vec<T> = data.rows().map(|row| row[j].max(-r).min(r)).collect();
            let mut sorted = col.clone();
            sorted.sort_by(|a, b| a.total_cmp(b));
            let (lo, hi) = (sorted[k], sorted[n - 1 - k]);
            col.iter_mut().for_each(|x| *x = x.max(lo).min(hi));
            col.into_iter().sum::<T>() / n_t
        })
        .collect();
    Vector::new(means)
}

/// l2 sensitivity of the clamped mean: `2 R sqrt(d) / n`.
pub fn winsorized_sensitivity<T: Real>(n: usize, d: usize, range_bound: T) -> T {
    T::lit(2.0) * range_bound * T::from_usize(d).unwrap().sqrt() / T::from_usize(n).unwrap()
}

/// Private winsorized mean, in release mode.
pub fn dp_winsorized_mean<T: Real>(
    data: &Dataset<T>,
    wcfg: &WinsorizeConfig<T>,
    params: &PrivacyParams<T>,
    seed: u64,
) -> Result<EstimateReport<T>> {
    dp_winsorized_mean_with(data, wcfg, params, seed, ReleaseMode::Release)
}

pub fn dp_winsorized_mean_with<T: Real>(
    data: &Dataset<T>,
    wcfg: &WinsorizeConfig<T>,
    params: &PrivacyParams<T>,
    seed: u64,
    mode: ReleaseMode,
) -> Result<EstimateReport<T>> {
    let mean = winsorized_mean(data, wcfg)?;
    let sensitivity = winsorized_sensitivity(data.n(), data.d(), wcfg.range_bound);
    let spec = noise_scale(sensitivity, params, seed)?;
    Ok(EstimateReport {
        method: Method::DpWinsorized,
        private_mean: add_gaussian_noise(&mean, &spec),
        robust_mean: (mode == ReleaseMode::Diagnostic).then_some(mean),
        noise_variance: spec.variance,
        bound_used: wcfg.range_bound,
        sensitivity_used: sensitivity,
        params: *params,
        filter_diag: None,
        seed,
        warnings: params.warnings(),
    })
}
