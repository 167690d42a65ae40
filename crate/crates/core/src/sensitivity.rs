//! Closed-form bounds on the error of the filtered mean, and the resulting
//! l2 global sensitivity.
//!
//! None of these functions take the dimension: the bounds depend only on
//! the corruption fraction `gamma` (or the sample size `n` in the
//! single-corrupted-point case) and the threshold constant `C`.
//! Logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::FilterParams;
use crate::scalar::Real;

/// Corruption level, confidence and threshold constant for the filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustConfig<T: Real> {
    /// Fraction of corrupted samples, in `(0, 0.5)`.
    pub gamma: T,
    /// Confidence parameter, in `(0, 1)`. Doubles as the Gaussian
    /// mechanism's additive privacy term `delta`.
    pub tau: T,
    /// The constant `C` in `Thresh(gamma) = C * gamma * ln(1/gamma)`.
    pub c_thresh: T,
    #[serde(default)]
    pub filter: FilterParams<T>,
}

impl<T: Real> RobustConfig<T> {
    pub fn new(gamma: T, tau: T, c_thresh: T) -> Result<Self> {
        let cfg = RobustConfig {
            gamma,
            tau,
            c_thresh,
            filter: FilterParams::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_gamma(self.gamma)?;
        if !(self.tau > T::zero() && self.tau < T::one()) {
            return Err(Error::domain(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        check_c(self.c_thresh)?;
        self.filter.validate()
    }
}

/// Bound values used to calibrate the Gaussian mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityBound<T: Real> {
    pub kappa: T,
    pub robust_error: T,
    pub l2_sensitivity: T,
}

impl<T: Real> SensitivityBound<T> {
    /// Bound for a filter run at corruption level `gamma`.
    pub fn for_gamma(gamma: T, c_thresh: T) -> Result<Self> {
        let robust_error = robust_error_bound(gamma, c_thresh)?;
        Ok(SensitivityBound {
            kappa: kappa(gamma)?,
            robust_error,
            l2_sensitivity: global_sensitivity(robust_error)?,
        })
    }

    /// Bound for the single-corrupted-point case `gamma = 1/n`.
    pub fn for_single_point(n: usize, c_thresh: T) -> Result<Self> {
        let robust_error = single_point_bound(n, c_thresh)?;
        Ok(SensitivityBound {
            kappa: kappa(T::one() / T::from_usize(n).unwrap())?,
            robust_error,
            l2_sensitivity: global_sensitivity(robust_error)?,
        })
    }
}

pub(crate) fn check_gamma<T: Real>(gamma: T) -> Result<()> {
    if gamma > T::zero() && gamma < T::lit(0.5) {
        Ok(())
    } else {
        Err(Error::domain(format!("gamma must lie in (0, 0.5), got {gamma}")))
    }
}

pub(crate) fn check_c<T: Real>(c: T) -> Result<()> {
    if c > T::zero() && c.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("threshold constant C must be positive, got {c}")))
    }
}

/// `kappa = gamma/(1-2 gamma) + (sqrt(2) gamma + sqrt(2 gamma))/(1-2 gamma)`.
pub fn kappa<T: Real>(gamma: T) -> Result<T> {
    check_gamma(gamma)?;
    let two = T::lit(2.0);
    let denom = T::one() - two * gamma;
    Ok(gamma / denom + (two.sqrt() * gamma + (two * gamma).sqrt()) / denom)
}

/// `(3 + 2 sqrt(gamma)) kappa + 2 gamma sqrt(C ln(1/gamma))`: the worst-case
/// distance between the filtered mean and the true mean once the spectral
/// certificate holds.
pub fn robust_error_bound<T: Real>(gamma: T, c_thresh: T) -> Result<T> {
    let k = kappa(gamma)?;
    check_c(c_thresh)?;
    let two = T::lit(2.0);
    Ok((T::lit(3.0) + two * gamma.sqrt()) * k + two * gamma * (c_thresh * gamma.recip().ln()).sqrt())
}

/// Error bound when at most one sample is corrupted:
/// `(3 + 2/sqrt(n)) (1 + sqrt(2) + sqrt(2n))/(n - 2) + 2 sqrt(C ln n)/n`.
pub fn single_point_bound<T: Real>(n: usize, c_thresh: T) -> Result<T> {
    if n < 3 {
        return Err(Error::domain(format!("single-point bound needs n >= 3, got {n}")));
    }
    check_c(c_thresh)?;
    let n_t = T::from_usize(n).unwrap();
    let two = T::lit(2.0);
    let first = (T::lit(3.0) + two / n_t.sqrt()) * (T::one() + two.sqrt() + (two * n_t).sqrt()) / (n_t - two);
    Ok(first + two * (c_thresh * n_t.ln()).sqrt() / n_t)
}

/// l2 global sensitivity of the filtered mean: twice the error bound, by the
/// triangle inequality through the true mean.
pub fn global_sensitivity<T: Real>(robust_error: T) -> Result<T> {
    if robust_error > T::zero() && robust_error.is_finite() {
        Ok(robust_error + robust_error)
    } else {
        Err(Error::domain(format!(
            "error bound must be positive, got {robust_error}"
        )))
    }
}
