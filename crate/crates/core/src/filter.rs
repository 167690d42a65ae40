//! Iterative spectral filtering for robust mean estimation.
//!
//! Each round computes the empirical mean and covariance of the surviving
//! points. If the top eigenvalue of `Sigma - I` is at most
//! `Thresh(gamma) = C * gamma * ln(1/gamma)` the empirical mean is certified
//! and returned. Otherwise the points are projected on the top eigenvector
//! and the far tail is removed.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{
    dot, empirical_covariance, empirical_mean, top_eigenpair, Vector, DEFAULT_EIGEN_MAX_ITER, DEFAULT_EIGEN_TOL,
};
use crate::scalar::Real;
use crate::sensitivity::{check_c, check_gamma, RobustConfig};

/// Which tail bound the empirical tail fraction is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailRule {
    /// `a * exp(-T^2/2) + b * gamma`
    #[default]
    Simple,
    /// `a * exp(-T^2/2) + b * gamma / (T^2 ln(d ln((d/gamma) tau)))`
    TauDependent,
}

/// Constants of the filter step and the eigensolver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterParams<T: Real> {
    pub tail_mult: T,
    pub gamma_mult: T,
    pub rule: TailRule,
    pub eigen_tol: T,
    pub eigen_max_iter: usize,
}

impl<T: Real> Default for FilterParams<T> {
    fn default() -> Self {
        FilterParams {
            tail_mult: T::lit(8.0),
            gamma_mult: T::lit(8.0),
            rule: TailRule::Simple,
            eigen_tol: T::lit(DEFAULT_EIGEN_TOL),
            eigen_max_iter: DEFAULT_EIGEN_MAX_ITER,
        }
    }
}

impl<T: Real> FilterParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tail_mult >= T::zero() && self.gamma_mult >= T::zero()) {
            return Err(Error::domain("filter tail constants must be non-negative"));
        }
        if !(self.eigen_tol > T::zero()) || self.eigen_max_iter == 0 {
            return Err(Error::domain("eigen tolerance and iteration cap must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Certificate,
    FallbackExhausted,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDiagnostics<T: Real> {
    /// Number of removal rounds performed.
    pub iterations: usize,
    /// Indices into the input dataset, ascending.
    pub removed_indices: Vec<usize>,
    pub final_spectral_deviation: T,
    pub threshold: T,
    pub terminated_by: Termination,
    /// Whether the last eigensolve met its residual tolerance.
    pub eigen_converged: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome<T: Real> {
    pub mean: Vector<T>,
    pub surviving: Dataset<T>,
    /// Input indices of the rows in `surviving`, ascending.
    pub surviving_indices: Vec<usize>,
    pub diagnostics: FilterDiagnostics<T>,
}

/// `Thresh(gamma) = C * gamma * ln(1/gamma)`.
pub fn thresh<T: Real>(gamma: T, c_thresh: T) -> Result<T> {
    check_gamma(gamma)?;
    check_c(c_thresh)?;
    Ok(c_thresh * gamma * gamma.recip().ln())
}

/// `gamma / (T^2 ln(d ln((d/gamma) tau)))`, read left to right.
///
/// Returns `None` when the nested logarithms are not positive, in which case
/// the expression has no meaningful value.
pub(crate) fn tau_tail_term<T: Real>(d: usize, gamma: T, tau: T, t: T) -> Option<T> {
    let d_t = T::from_usize(d).unwrap();
    let inner = (d_t / gamma * tau).ln();
    let outer = (d_t * inner).ln();
    let denom = t * t * outer;
    (inner > T::zero() && outer > T::zero() && denom > T::zero()).then(|| gamma / denom)
}

fn tail_bound<T: Real>(t: T, d: usize, gamma: T, tau: T, params: &FilterParams<T>) -> Option<T> {
    let gauss = params.tail_mult * (-(t * t) / T::lit(2.0)).exp();
    match params.rule {
        TailRule::Simple => Some(gauss + params.gamma_mult * gamma),
        TailRule::TauDependent => tau_tail_term(d, gamma, tau, t).map(|x| gauss + params.gamma_mult * x),
    }
}

/// Indices to remove for one filtering round, using the default constants.
pub fn filter_step<T: Real>(data: &Dataset<T>, mu: &Vector<T>, v: &Vector<T>, gamma: T) -> Result<Vec<usize>> {
    filter_step_with(data, mu, v, gamma, T::lit(0.1), &FilterParams::default())
}

/// One filtering round.
///
/// With projections `p_i = |v . (x_i - mu)|`, picks the smallest `T` among
/// the projections whose strict tail `|{i : p_i > T}| / n` exceeds the tail
/// bound, and returns every index with `p_i > T`. If no projection
/// qualifies, returns the single index of the largest projection (lowest
/// index on ties). The result is never empty and is sorted ascending.
pub fn filter_step_with<T: Real>(
    data: &Dataset<T>,
    mu: &Vector<T>,
    v: &Vector<T>,
    gamma: T,
    tau: T,
    params: &FilterParams<T>,
) -> Result<Vec<usize>> {
    let n = data.n();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if mu.dim() != data.d() || v.dim() != data.d() {
        return Err(Error::DimensionMismatch {
            expected: data.d(),
            got: if mu.dim() != data.d() { mu.dim() } else { v.dim() },
        });
    }

    let mut centered = vec![T::zero(); data.d()];
    let proj: Vec<T> = data
        .rows()
        .map(|row| {
            for ((c, &x), &m) in centered.iter_mut().zip(row).zip(mu.as_slice()) {
                *c = x - m;
            }
            dot(&centered, v.as_slice()).abs()
        })
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| proj[a].total_cmp(&proj[b]).then(a.cmp(&b)));

    let n_t = T::from_usize(n).unwrap();
    let mut k = 0;
    while k < n {
        let t = proj[order[k]];
        let mut end = k + 1;
        while end < n && proj[order[end]] == t {
            end += 1;
        }
        let tail = n - end;
        if tail == 0 {
            break;
        }
        let frac = T::from_usize(tail).unwrap() / n_t;
        if let Some(bound) = tail_bound(t, data.d(), gamma, tau, params) {
            if frac > bound {
                let mut out = order[end..].to_vec();
                out.sort_unstable();
                return Ok(out);
            }
        }
        k = end;
    }

    // Progress fallback: the farthest point, lowest index among ties.
    let far = (0..n).fold(0, |best, i| if proj[i] > proj[best] { i } else { best });
    Ok(vec![far])
}

/// Spectral deviation tested in the filter's first round: the top
/// eigenvalue of the empirical covariance minus one, clamped at 0.
pub fn initial_spectral_deviation<T: Real>(data: &Dataset<T>, params: &FilterParams<T>) -> Result<T> {
    let mu = empirical_mean(data)?;
    let sigma = empirical_covariance(data, &mu)?;
    let top = top_eigenpair(&sigma, params.eigen_tol, params.eigen_max_iter)?;
    Ok((top.value - T::one()).max(T::zero()))
}

/// Runs the filter until the spectral certificate holds.
///
/// Stops early, returning the current empirical mean, when a round would
/// leave fewer than `max(2, ceil((1 - 2 gamma) n))` points
/// (`FallbackExhausted`) or after `n` rounds (`MaxIterations`).
pub fn filter_gaussian_unknown_mean<T: Real>(data: &Dataset<T>, cfg: &RobustConfig<T>) -> Result<FilterOutcome<T>> {
    cfg.validate()?;
    let n = data.n();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let gamma = cfg.gamma;
    let threshold = thresh(gamma, cfg.c_thresh)?;
    // The small offset keeps ceil() from rounding n - 2 up when gamma = 1/n.
    let floor = ((T::one() - T::lit(2.0) * gamma) * T::from_usize(n).unwrap() - T::lit(1e-9))
        .ceil()
        .to_usize()
        .unwrap_or(n)
        .max(2);

    let mut warnings = Vec::new();
    let needed = T::from_usize(data.d()).unwrap() / (gamma * gamma);
    if T::from_usize(n).unwrap() < needed {
        warnings.push(format!(
            "n = {n} is below d / gamma^2 = {needed:.1}; the certificate may be unreachable"
        ));
    }

    let mut alive: Vec<usize> = (0..n).collect();
    let mut iterations = 0;
    loop {
        let current = data.select(&alive);
        let mu = empirical_mean(&current)?;
        let sigma = empirical_covariance(&current, &mu)?;
        // The covariance is PSD, so its dominant eigenvalue is its largest.
        let top = top_eigenpair(&sigma, cfg.filter.eigen_tol, cfg.filter.eigen_max_iter)?;
        let deviation = (top.value - T::one()).max(T::zero());

        let terminated_by = if deviation <= threshold {
            Some(Termination::Certificate)
        } else if iterations >= n {
            Some(Termination::MaxIterations)
        } else {
            None
        };

        let step = match terminated_by {
            Some(_) => None,
            None => {
                let local = filter_step_with(&current, &mu, &top.vector, gamma, cfg.tau, &cfg.filter)?;
                if alive.len() - local.len() < floor {
                    None
                } else {
                    Some(local)
                }
            }
        };

        match step {
            Some(local) => {
                let drop: BTreeSet<usize> = local.into_iter().collect();
                alive = alive
                    .into_iter()
                    .enumerate()
                    .filter_map(|(pos, idx)| (!drop.contains(&pos)).then_some(idx))
                    .collect();
                iterations += 1;
            }
            None => {
                let kept: BTreeSet<usize> = alive.iter().copied().collect();
                let removed_indices = (0..n).filter(|i| !kept.contains(i)).collect();
                return Ok(FilterOutcome {
                    mean: mu,
                    surviving: current,
                    surviving_indices: alive,
                    diagnostics: FilterDiagnostics {
                        iterations,
                        removed_indices,
                        final_spectral_deviation: deviation,
                        threshold,
                        terminated_by: terminated_by.unwrap_or(Termination::FallbackExhausted),
                        eigen_converged: top.converged,
                        warnings,
                    },
                });
            }
        }
    }
}

/// `Delta(S, S') = |S symmetric-difference S'| / |S|` for a clean sample `S`
/// of `n_original` rows and the filter output `S'`.
///
/// Rows are identified by their index in the clean sample. `removed` are
/// rows the filter dropped; `injected` are rows whose clean value was
/// replaced by an adversarial point. A clean row is missing from `S'` if it
/// was removed or replaced; an adversarial row is extra in `S'` if it
/// survived.
pub fn symmetric_difference_ratio(n_original: usize, removed: &[usize], injected: &[usize]) -> f64 {
    if n_original == 0 {
        return 0.0;
    }
    let removed: BTreeSet<usize> = removed.iter().copied().collect();
    let injected: BTreeSet<usize> = injected.iter().copied().collect();
    let missing_clean = removed.union(&injected).count();
    let surviving_bad = injected.difference(&removed).count();
    (missing_clean + surviving_bad) as f64 / n_original as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::collections::HashMap;

    fn cfg(gamma: f64, c: f64) -> RobustConfig<f64> {
        RobustConfig::new(gamma, 0.05, c).unwrap()
    }

    #[test]
    fn thresh_values() {
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(thresh(1.0 / e, 1.0).unwrap(), 1.0 / e, epsilon = 1e-15);
        assert_abs_diff_eq!(thresh(0.1, 1.0).unwrap(), 0.230_258_509_299_404_6, epsilon = 1e-12);
        assert_eq!(thresh(0.1, 10.0).unwrap(), 10.0 * thresh(0.1, 1.0).unwrap());
        assert!(thresh(0.5, 1.0).is_err());
        assert!(thresh(0.1, 0.0).is_err());
    }

    #[test]
    fn step_on_identical_points_falls_back_to_lowest_index() {
        let data = Dataset::from_rows(vec![vec![1.0, 1.0]; 5]).unwrap();
        let mu = empirical_mean(&data).unwrap();
        let v = Vector::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(filter_step(&data, &mu, &v, 0.1).unwrap(), vec![0]);
    }

    #[test]
    fn step_removes_single_far_outlier() {
        let mut rows = vec![vec![0.0]; 99];
        rows.insert(37, vec![50.0]);
        let data = Dataset::from_rows(rows).unwrap();
        let mu = empirical_mean(&data).unwrap();
        let v = Vector::new(vec![1.0]).unwrap();
        assert_eq!(filter_step(&data, &mu, &v, 0.01).unwrap(), vec![37]);
    }

    #[test]
    fn step_uses_tail_rule_when_it_fires() {
        // Around mu = 0: at T = 3 the tail {100.0 x 10} has fraction 0.1 >
        // 8 exp(-4.5) = 0.089, while T = 0 needs a fraction above 8.
        let mut rows = vec![vec![0.0]; 80];
        rows.extend((0..10).map(|_| vec![3.0]));
        rows.extend((0..10).map(|_| vec![100.0]));
        let data = Dataset::from_rows(rows).unwrap();
        let mu = Vector::new(vec![0.0]).unwrap();
        let v = Vector::new(vec![1.0]).unwrap();
        let params = FilterParams {
            gamma_mult: 0.0,
            ..FilterParams::default()
        };
        let out = filter_step_with(&data, &mu, &v, 0.1, 0.05, &params).unwrap();
        assert_eq!(out, (90..100).collect::<Vec<_>>());
    }

    #[test]
    fn step_rejects_empty_and_mismatch() {
        let empty = Dataset::<f64>::from_flat(0, 1, vec![]).unwrap();
        let v = Vector::new(vec![1.0]).unwrap();
        assert!(matches!(filter_step(&empty, &v, &v, 0.1), Err(Error::EmptyInput)));
        let data = Dataset::from_rows(vec![vec![1.0, 2.0]]).unwrap();
        assert!(filter_step(&data, &v, &v, 0.1).is_err());
    }

    #[test]
    fn tau_tail_term_requires_positive_logs() {
        assert!(tau_tail_term(5, 0.2, 0.05, 1.0).is_some());
        assert!(tau_tail_term(1, 0.2, 0.05, 1.0).is_none());
    }

    #[test]
    fn copies_of_one_point_certify_immediately() {
        let data = Dataset::from_rows(vec![vec![2.0, -1.0, 0.5]; 10]).unwrap();
        let out = filter_gaussian_unknown_mean(&data, &cfg(0.1, 1.0)).unwrap();
        assert_eq!(out.mean.as_slice(), &[2.0, -1.0, 0.5]);
        assert_eq!(out.diagnostics.iterations, 0);
        assert_eq!(out.diagnostics.terminated_by, Termination::Certificate);
        assert!(out.diagnostics.removed_indices.is_empty());
    }

    #[test]
    fn floor_stops_single_point_filter_after_two_rounds() {
        // Twelve points at 0 and eight far, symmetric ones: no tail of more
        // than 8 gamma = 0.4 exists, so each round drops the farthest point.
        // At gamma = 1/n the floor is n - 2.
        let mut rows = vec![vec![0.0]; 12];
        for k in 1..=4 {
            rows.push(vec![1000.0 * k as f64]);
            rows.push(vec![-1000.0 * k as f64]);
        }
        let data = Dataset::from_rows(rows).unwrap();
        let out = filter_gaussian_unknown_mean(&data, &cfg(1.0 / 20.0, 1.0)).unwrap();
        assert_eq!(out.diagnostics.terminated_by, Termination::FallbackExhausted);
        assert_eq!(out.diagnostics.iterations, 2);
        assert_eq!(out.surviving.n(), 18);
        assert_eq!(out.diagnostics.removed_indices, vec![18, 19]);
    }

    #[test]
    fn rejects_tiny_input() {
        let data = Dataset::from_rows(vec![vec![1.0]]).unwrap();
        assert!(matches!(
            filter_gaussian_unknown_mean(&data, &cfg(0.1, 1.0)),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn symmetric_difference_examples() {
        assert_eq!(symmetric_difference_ratio(100, &[], &[]), 0.0);
        let removed: Vec<usize> = (0..10).collect();
        assert_abs_diff_eq!(symmetric_difference_ratio(100, &removed, &[]), 0.10);
        // Two injected rows, one caught by the filter.
        assert_abs_diff_eq!(symmetric_difference_ratio(10, &[3], &[3, 4]), 0.3);
    }

    /// Multiset oracle: clean rows are tagged `(i, false)`, adversarial
    /// replacements `(i, true)`; the ratio is the multiset symmetric
    /// difference of the clean sample and the survivors over `n`.
    fn multiset_oracle(n: usize, removed: &[usize], injected: &[usize]) -> f64 {
        let mut count: HashMap<(usize, bool), i64> = HashMap::new();
        for i in 0..n {
            *count.entry((i, false)).or_default() += 1;
        }
        for i in 0..n {
            if removed.contains(&i) {
                continue;
            }
            let tag = (i, injected.contains(&i));
            *count.entry(tag).or_default() -= 1;
        }
        count.values().map(|c| c.unsigned_abs()).sum::<u64>() as f64 / n as f64
    }

    proptest::proptest! {
        #[test]
        fn symmetric_difference_matches_multiset_oracle(
            n in 1usize..60,
            removed_mask in proptest::collection::vec(proptest::bool::weighted(0.2), 60),
            injected_mask in proptest::collection::vec(proptest::bool::weighted(0.2), 60),
        ) {
            let removed: Vec<usize> = (0..n).filter(|&i| removed_mask[i]).collect();
            let injected: Vec<usize> = (0..n).filter(|&i| injected_mask[i]).collect();
            let got = symmetric_difference_ratio(n, &removed, &injected);
            proptest::prop_assert!((got - multiset_oracle(n, &removed, &injected)).abs() < 1e-15);
        }
    }
}
