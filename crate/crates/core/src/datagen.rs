//! Synthetic data: identity-covariance Gaussian samples, corruption
//! adversaries, and an empirical goodness diagnostic for clean samples.

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::filter::tau_tail_term;
use crate::linalg::{empirical_covariance, empirical_mean, spectral_norm, Vector};
use crate::scalar::Real;

/// Standard deviation of the per-coordinate jitter around a directional
/// spread target.
const SPREAD_JITTER: f64 = 0.1;

/// How the adversary fills (or drops) the rows it controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Adversary<T: Real> {
    /// Every replaced row becomes `mu_true + offset`.
    ConstantCluster { offset: Vec<T> },
    /// Every replaced row becomes `mu_true + magnitude * direction` plus a
    /// small Gaussian jitter; `direction` is normalized before use.
    DirectionalSpread { direction: Vec<T>, magnitude: T },
    /// The rows with the largest first coordinate are deleted, not replaced.
    SubtractiveOnly,
}

impl<T: Real> Adversary<T> {
    /// `ConstantCluster` with offset `magnitude * e_1`.
    pub fn cluster_on_first_axis(d: usize, magnitude: T) -> Self {
        Adversary::ConstantCluster {
            offset: Vector::basis(d, 0, magnitude).into_vec(),
        }
    }

    /// `DirectionalSpread` along `e_1`.
    pub fn spread_on_first_axis(d: usize, magnitude: T) -> Self {
        Adversary::DirectionalSpread {
            direction: Vector::basis(d, 0, T::one()).into_vec(),
            magnitude,
        }
    }

    pub fn replaces_rows(&self) -> bool {
        !matches!(self, Adversary::SubtractiveOnly)
    }
}

/// Number of corrupted rows: `Binomial(n, gamma)` or the fixed `round(gamma n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMode {
    #[default]
    Binomial,
    Fixed,
}

/// Record of what the adversary did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionPlan<T: Real> {
    pub gamma: T,
    pub adversary: Adversary<T>,
    /// Affected row indices of the input, ascending.
    pub replaced_indices: Vec<usize>,
    pub m_prime: usize,
}

/// `n` i.i.d. draws from `N(mu, I_d)`, deterministic in `seed`.
pub fn sample_gaussian<T: Real>(n: usize, d: usize, mu: &Vector<T>, seed: u64) -> Result<Dataset<T>> {
    if n == 0 || d == 0 {
        return Err(Error::domain(format!(
            "sample size and dimension must be positive, got n = {n}, d = {d}"
        )));
    }
    if mu.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: mu.dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        for &m in mu.iter() {
            let z: f64 = rng.sample(StandardNormal);
            data.push(m + T::lit(z));
        }
    }
    Dataset::from_flat(n, d, data)
}

/// Applies gamma-corruption to `data`.
///
/// Replacing adversaries pick `m'` rows uniformly without replacement and
/// overwrite them, so `n` and `d` are preserved. `SubtractiveOnly` deletes
/// the `m'` rows with the largest first coordinate (lowest index on ties).
pub fn corrupt<T: Real>(
    data: &Dataset<T>,
    mu_true: &Vector<T>,
    gamma: T,
    adversary: &Adversary<T>,
    count: CountMode,
    seed: u64,
) -> Result<(Dataset<T>, CorruptionPlan<T>)> {
    if !(gamma >= T::zero() && gamma < T::lit(0.5)) {
        return Err(Error::domain(format!(
            "corruption level must lie in [0, 0.5), got {gamma}"
        )));
    }
    let (n, d) = (data.n(), data.d());
    if mu_true.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: mu_true.dim(),
        });
    }
    match adversary {
        Adversary::ConstantCluster { offset } if offset.len() != d => {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: offset.len(),
            })
        }
        Adversary::DirectionalSpread { direction, .. } if direction.len() != d => {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: direction.len(),
            })
        }
        _ => {}
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m_prime = match count {
        _ if gamma.is_zero() || n == 0 => 0,
        CountMode::Binomial => {
            let binom = Binomial::new(n as u64, gamma.as_f64()).map_err(|e| Error::domain(e.to_string()))?;
            binom.sample(&mut rng) as usize
        }
        CountMode::Fixed => (gamma * T::from_usize(n).unwrap()).round().to_usize().unwrap_or(0),
    };

    if let Adversary::SubtractiveOnly = adversary {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| data.row(b)[0].total_cmp(&data.row(a)[0]).then(a.cmp(&b)));
        let mut dropped = order[..m_prime].to_vec();
        dropped.sort_unstable();
        let kept: Vec<usize> = (0..n).filter(|i| dropped.binary_search(i).is_err()).collect();
        let plan = CorruptionPlan {
            gamma,
            adversary: adversary.clone(),
            replaced_indices: dropped,
            m_prime,
        };
        return Ok((data.select(&kept), plan));
    }

    let mut chosen = sample_indices(&mut rng, n, m_prime).into_vec();
    chosen.sort_unstable();
    let mut out = data.clone();
    match adversary {
        Adversary::ConstantCluster { offset } => {
            for &i in &chosen {
                for ((x, &m), &o) in out.row_mut(i).iter_mut().zip(mu_true.iter()).zip(offset) {
                    *x = m + o;
                }
            }
        }
        Adversary::DirectionalSpread { direction, magnitude } => {
            let len = direction.iter().map(|&x| x * x).sum::<T>().sqrt();
            if !(len > T::zero()) {
                return Err(Error::domain("spread direction must be non-zero"));
            }
            for &i in &chosen {
                for ((x, &m), &u) in out.row_mut(i).iter_mut().zip(mu_true.iter()).zip(direction) {
                    let jitter: f64 = rng.sample(StandardNormal);
                    *x = m + *magnitude * u / len + T::lit(SPREAD_JITTER * jitter);
                }
            }
        }
        Adversary::SubtractiveOnly => unreachable!(),
    }
    let plan = CorruptionPlan {
        gamma,
        adversary: adversary.clone(),
        replaced_indices: chosen,
        m_prime,
    };
    Ok((out, plan))
}

/// Result of checking the four goodness conditions on a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodnessReport<T: Real> {
    /// `max_i ||x_i - mu||_2` against `c1 sqrt(d ln(n / tau))`.
    pub cond1_max_norm: T,
    pub cond1_bound: T,
    pub cond1_pass: bool,
    /// Largest `|P_S[v.(X - mu) >= T] - P_G[...]|` over sampled directions
    /// and thresholds. Approximate: only finitely many `v` are tried.
    pub cond2_worst_gap: T,
    pub cond2_pass: bool,
    /// `||mean(S) - mu||_2 <= gamma`.
    pub cond3_mean_error: T,
    pub cond3_pass: bool,
    /// `||M_S - I||_2 <= gamma` with `M_S` the second moment about `mu`.
    pub cond4_cov_deviation: T,
    pub cond4_pass: bool,
}

impl<T: Real> GoodnessReport<T> {
    pub fn all_pass(&self) -> bool {
        self.cond1_pass && self.cond2_pass && self.cond3_pass && self.cond4_pass
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoodnessOptions {
    pub c1: f64,
    pub n_directions: usize,
    /// Thresholds `T` at which the tail condition is probed.
    pub t_grid: Vec<f64>,
}

impl Default for GoodnessOptions {
    fn default() -> Self {
        GoodnessOptions {
            c1: 3.0,
            n_directions: 200,
            t_grid: (1..=16).map(|k| 0.25 * k as f64).collect(),
        }
    }
}

/// Checks goodness of a clean sample with the default constants.
pub fn goodness_check<T: Real>(
    data: &Dataset<T>,
    mu_true: &Vector<T>,
    gamma: T,
    tau: T,
    n_directions: usize,
    seed: u64,
) -> Result<GoodnessReport<T>> {
    let opts = GoodnessOptions {
        n_directions,
        ..GoodnessOptions::default()
    };
    goodness_check_with(data, mu_true, gamma, tau, &opts, seed)
}

pub fn goodness_check_with<T: Real>(
    data: &Dataset<T>,
    mu_true: &Vector<T>,
    gamma: T,
    tau: T,
    opts: &GoodnessOptions,
    seed: u64,
) -> Result<GoodnessReport<T>> {
    let (n, d) = (data.n(), data.d());
    if mu_true.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: mu_true.dim(),
        });
    }
    let n_t = T::from_usize(n).unwrap();

    // Condition 1.
    let cond1_max_norm = data
        .rows()
        .map(|r| {
            r.iter()
                .zip(mu_true.iter())
                .map(|(&x, &m)| (x - m) * (x - m))
                .sum::<T>()
                .sqrt()
        })
        .fold(T::zero(), T::max);
    let cond1_bound = T::lit(opts.c1) * (T::from_usize(d).unwrap() * (n_t / tau).ln()).sqrt();

    // Condition 2, on sampled directions.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cond2_worst_gap = T::zero();
    let mut cond2_pass = true;
    let mut v = vec![0.0f64; d];
    for _ in 0..opts.n_directions {
        loop {
            v.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
            let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if len > 0.0 {
                v.iter_mut().for_each(|x| *x /= len);
                break;
            }
        }
        let proj: Vec<T> = data
            .rows()
            .map(|r| {
                r.iter()
                    .zip(mu_true.iter())
                    .zip(&v)
                    .map(|((&x, &m), &u)| (x - m) * T::lit(u))
                    .sum::<T>()
            })
            .collect();
        for &t in &opts.t_grid {
            let t_t = T::lit(t);
            let empirical = T::from_usize(proj.iter().filter(|&&p| p >= t_t).count()).unwrap() / n_t;
            let gaussian = T::lit(0.5 * libm::erfc(t / std::f64::consts::SQRT_2));
            let gap = (empirical - gaussian).abs();
            cond2_worst_gap = cond2_worst_gap.max(gap);
            if let Some(bound) = tau_tail_term(d, gamma, tau, t_t) {
                cond2_pass &= gap <= bound;
            }
        }
    }

    // Condition 3.
    let cond3_mean_error = empirical_mean(data)?.distance(mu_true);

    // Condition 4.
    let second_moment = empirical_covariance(data, mu_true)?;
    let cond4_cov_deviation = spectral_norm(&second_moment.shifted(-T::one()))?;

    Ok(GoodnessReport {
        cond1_max_norm,
        cond1_bound,
        cond1_pass: cond1_max_norm <= cond1_bound,
        cond2_worst_gap,
        cond2_pass,
        cond3_mean_error,
        cond3_pass: cond3_mean_error <= gamma,
        cond4_cov_deviation,
        cond4_pass: cond4_cov_deviation <= gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zeros(d: usize) -> Vector<f64> {
        Vector::zeros(d)
    }

    #[test]
    fn sampling_is_seeded() {
        let a = sample_gaussian(50, 3, &zeros(3), 11).unwrap();
        let b = sample_gaussian(50, 3, &zeros(3), 11).unwrap();
        let c = sample_gaussian(50, 3, &zeros(3), 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sampling_rejects_bad_sizes() {
        assert!(sample_gaussian(0, 3, &zeros(3), 0).is_err());
        assert!(sample_gaussian(3, 2, &zeros(3), 0).is_err());
    }

    #[test]
    fn gamma_zero_is_identity() {
        let data = sample_gaussian(40, 2, &zeros(2), 1).unwrap();
        let adv = Adversary::cluster_on_first_axis(2, 10.0);
        let (out, plan) = corrupt(&data, &zeros(2), 0.0, &adv, CountMode::Binomial, 3).unwrap();
        assert_eq!(out, data);
        assert!(plan.replaced_indices.is_empty());
        assert_eq!(plan.m_prime, 0);
    }

    #[test]
    fn corrupt_rejects_bad_gamma() {
        let data = sample_gaussian(10, 2, &zeros(2), 1).unwrap();
        let adv = Adversary::SubtractiveOnly;
        assert!(corrupt(&data, &zeros(2), 0.5, &adv, CountMode::Fixed, 0).is_err());
        assert!(corrupt(&data, &zeros(2), -0.1, &adv, CountMode::Fixed, 0).is_err());
    }

    #[test]
    fn plan_matches_modified_rows() {
        let data = sample_gaussian(300, 4, &zeros(4), 5).unwrap();
        for adv in [
            Adversary::cluster_on_first_axis(4, 10.0),
            Adversary::spread_on_first_axis(4, 6.0),
        ] {
            let (out, plan) = corrupt(&data, &zeros(4), 0.2, &adv, CountMode::Binomial, 9).unwrap();
            assert_eq!((out.n(), out.d()), (data.n(), data.d()));
            assert_eq!(plan.replaced_indices.len(), plan.m_prime);
            let changed: Vec<usize> = (0..data.n()).filter(|&i| out.row(i) != data.row(i)).collect();
            assert_eq!(changed, plan.replaced_indices);
        }
    }

    #[test]
    fn cluster_rows_sit_at_offset() {
        let data = sample_gaussian(100, 3, &zeros(3), 2).unwrap();
        let adv = Adversary::cluster_on_first_axis(3, 10.0);
        let (out, plan) = corrupt(&data, &zeros(3), 0.1, &adv, CountMode::Fixed, 4).unwrap();
        assert_eq!(plan.m_prime, 10);
        for &i in &plan.replaced_indices {
            assert_eq!(out.row(i), &[10.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn subtractive_drops_largest_first_coordinate() {
        let data = Dataset::from_rows((0..10).map(|i| vec![i as f64, 0.0]).collect()).unwrap();
        let (out, plan) = corrupt(&data, &zeros(2), 0.2, &Adversary::SubtractiveOnly, CountMode::Fixed, 0).unwrap();
        assert_eq!(plan.replaced_indices, vec![8, 9]);
        assert_eq!(out.n(), 8);
        assert_eq!(out.column(0), (0..8).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn wrong_true_mean_fails_condition_three() {
        let data = sample_gaussian(2000, 3, &zeros(3), 8).unwrap();
        let shifted = Vector::new(vec![10.0, 0.0, 0.0]).unwrap();
        let r = goodness_check(&data, &shifted, 0.2, 0.05, 10, 1).unwrap();
        assert!(!r.cond3_pass);
        assert!(r.cond2_worst_gap >= 0.0);
    }

    #[test]
    fn large_clean_sample_is_good_on_conditions_three_and_four() {
        let data = sample_gaussian(50_000, 5, &zeros(5), 21).unwrap();
        let r = goodness_check(&data, &zeros(5), 0.2, 0.05, 20, 2).unwrap();
        assert!(r.cond3_pass && r.cond4_pass, "{r:?}");
        assert!(r.cond1_pass);
    }
}
