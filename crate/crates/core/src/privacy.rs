//! The Gaussian mechanism.
//!
//! Noise is generated from a ChaCha20 keystream keyed by the seed. Each
//! coordinate consumes exactly two 64-bit words (one Box-Muller pair, cosine
//! branch only), so coordinate `i` always reads keystream words
//! `[4i, 4i + 4)` and the draw is a pure function of `(seed, i)`.

use std::f64::consts::TAU;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::scalar::Real;

/// `(epsilon, delta)` privacy-loss budget.
///
/// In the robust estimators `delta` is the confidence parameter `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams<T: Real> {
    pub epsilon: T,
    pub delta: T,
}

impl<T: Real> PrivacyParams<T> {
    pub fn new(epsilon: T, delta: T) -> Result<Self> {
        let p = PrivacyParams { epsilon, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > T::zero() && self.epsilon.is_finite()) {
            return Err(Error::domain(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.delta > T::zero() && self.delta < T::one()) {
            return Err(Error::domain(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        Ok(())
    }

    /// Non-fatal diagnostics about the parameter regime.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.epsilon > T::one() {
            out.push(format!(
                "epsilon = {} > 1 is outside the classical Gaussian-mechanism regime",
                self.epsilon
            ));
        }
        out
    }
}

/// Per-coordinate Gaussian noise description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec<T: Real> {
    /// Per-coordinate variance `sigma^2`.
    pub variance: T,
    /// l2 sensitivity the variance was calibrated to.
    pub sensitivity: T,
    pub seed: u64,
}

impl<T: Real> NoiseSpec<T> {
    pub fn sigma(&self) -> T {
        self.variance.sqrt()
    }
}

/// `sigma^2 = 2 ln(1.25/delta) * sensitivity^2 / epsilon^2`.
///
/// The dimension of the vector later noised is deliberately not an input.
pub fn noise_scale<T: Real>(sensitivity: T, params: &PrivacyParams<T>, seed: u64) -> Result<NoiseSpec<T>> {
    params.validate()?;
    if !(sensitivity >= T::zero() && sensitivity.is_finite()) {
        return Err(Error::domain(format!(
            "sensitivity must be non-negative, got {sensitivity}"
        )));
    }
    for w in params.warnings() {
        log::warn!("{w}");
    }
    let variance = T::lit(2.0) * (T::lit(1.25) / params.delta).ln() * sensitivity * sensitivity
        / (params.epsilon * params.epsilon);
    Ok(NoiseSpec {
        variance,
        sensitivity,
        seed,
    })
}

/// Deterministic stream of standard normal draws for a seed.
pub fn standard_normal_stream(seed: u64) -> impl Iterator<Item = f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    std::iter::repeat_with(move || {
        // u1 in (0, 1] keeps the log finite.
        let u1 = ((rng.next_u64() >> 11) + 1) as f64 / (1u64 << 53) as f64;
        let u2 = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
    })
}

/// `value + N(0, spec.variance * I)`, deterministic in `(value, spec)`.
pub fn add_gaussian_noise<T: Real>(value: &Vector<T>, spec: &NoiseSpec<T>) -> Vector<T> {
    if spec.variance.is_zero() {
        return value.clone();
    }
    let sigma = spec.sigma();
    let noised = value
        .iter()
        .zip(standard_normal_stream(spec.seed))
        .map(|(&x, z)| x + sigma * T::lit(z))
        .collect();
    Vector::from_vec_unchecked(noised)
}
