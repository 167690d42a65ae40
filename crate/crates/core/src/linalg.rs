//! Dense vector and symmetric-matrix primitives used by the filter.
//!
//! Everything here is a pure function of its inputs. Matrices are small
//! (d x d with d in the hundreds at most), so storage is a flat row-major
//! `Vec` and the only eigensolver is power iteration for the dominant pair.

use std::ops::Index;

use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seed::splitmix64;

pub const DEFAULT_EIGEN_TOL: f64 = 1e-7;
pub const DEFAULT_EIGEN_MAX_ITER: usize = 1000;

/// Consecutive stalled iterations after which the iterate is perturbed.
const STALL_WINDOW: usize = 10;

/// A finite, non-empty real vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Vector<T: Real>(Vec<T>);

impl<T: Real> Vector<T> {
    pub fn new(entries: Vec<T>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(i) = entries.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("vector entry {i}")));
        }
        Ok(Vector(entries))
    }

    pub fn zeros(d: usize) -> Self {
        assert!(d >= 1, "vector dimension must be at least 1");
        Vector(vec![T::zero(); d])
    }

    /// The `i`-th standard basis vector scaled by `scale`.
    pub fn basis(d: usize, i: usize, scale: T) -> Self {
        let mut v = Self::zeros(d);
        v.0[i] = scale;
        v
    }

    pub(crate) fn from_vec_unchecked(entries: Vec<T>) -> Self {
        debug_assert!(!entries.is_empty());
        Vector(entries)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.0.iter()
    }

    pub fn norm(&self) -> T {
        norm(&self.0)
    }

    pub fn dot(&self, other: &Self) -> T {
        dot(&self.0, &other.0)
    }

    /// `self - other`, panicking on dimension mismatch.
    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        Vector(self.0.iter().zip(&other.0).map(|(&a, &b)| a - b).collect())
    }

    /// Euclidean distance to `other`.
    pub fn distance(&self, other: &Self) -> T {
        self.sub(other).norm()
    }
}

impl<T: Real> Index<usize> for Vector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

/// A symmetric d x d matrix, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T: Real> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> SymMatrix<T> {
    /// Builds a matrix from row-major entries, checking finiteness and
    /// symmetry to an absolute tolerance of 1e-10.
    pub fn from_row_major(dim: usize, data: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyInput);
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("matrix entry ({}, {})", i / dim, i % dim)));
        }
        let tol = T::lit(1e-10).max(T::epsilon() * T::lit(16.0));
        for i in 0..dim {
            for j in (i + 1)..dim {
                let (a, b) = (data[i * dim + j], data[j * dim + i]);
                if (a - b).abs() > tol {
                    return Err(Error::domain(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(SymMatrix { dim, data })
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![T::one(); dim])
    }

    pub fn diagonal(diag: &[T]) -> Self {
        let dim = diag.len();
        assert!(dim >= 1, "matrix dimension must be at least 1");
        let mut data = vec![T::zero(); dim * dim];
        for (i, &x) in diag.iter().enumerate() {
            data[i * dim + i] = x;
        }
        SymMatrix { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// `self + shift * I`.
    pub fn shifted(&self, shift: T) -> Self {
        let mut out = self.clone();
        for i in 0..self.dim {
            out.data[i * self.dim + i] = out.data[i * self.dim + i] + shift;
        }
        out
    }

    /// `-self`.
    pub fn negated(&self) -> Self {
        SymMatrix {
            dim: self.dim,
            data: self.data.iter().map(|&x| -x).collect(),
        }
    }

    /// Matrix-vector product into `out`.
    pub fn mul_vec_into(&self, v: &[T], out: &mut [T]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), v);
        }
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        self.mul_vec_into(v, &mut out);
        out
    }

    /// Rayleigh quotient `v^T M v / v^T v`.
    pub fn rayleigh(&self, v: &[T]) -> T {
        dot(v, &self.mul_vec(v)) / dot(v, v)
    }

    /// Largest absolute row sum; an upper bound on the spectral radius.
    pub fn max_abs_row_sum(&self) -> T {
        (0..self.dim)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }
}

/// Dominant eigenpair returned by power iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult<T: Real> {
    pub value: T,
    pub vector: Vector<T>,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub(crate) fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

fn normalize<T: Real>(v: &mut [T]) -> T {
    let n = norm(v);
    if n > T::zero() {
        v.iter_mut().for_each(|x| *x = *x / n);
    }
    n
}

/// Pairwise (cascade) column sums over a contiguous block of rows.
fn pairwise_column_sums<T: Real>(data: &Dataset<T>, lo: usize, hi: usize, out: &mut [T]) {
    const BLOCK: usize = 8;
    if hi - lo <= BLOCK {
        for i in lo..hi {
            for (o, &x) in out.iter_mut().zip(data.row(i)) {
                *o = *o + x;
            }
        }
        return;
    }
    let mid = lo + (hi - lo) / 2;
    let mut right = vec![T::zero(); out.len()];
    pairwise_column_sums(data, lo, mid, out);
    pairwise_column_sums(data, mid, hi, &mut right);
    for (o, r) in out.iter_mut().zip(right) {
        *o = *o + r;
    }
}

/// Coordinate-wise arithmetic mean of the rows.
pub fn empirical_mean<T: Real>(data: &Dataset<T>) -> Result<Vector<T>> {
    let n = data.n();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut sums = vec![T::zero(); data.d()];
    pairwise_column_sums(data, 0, n, &mut sums);
    let n_t = T::from_usize(n).unwrap();
    Ok(Vector(sums.into_iter().map(|s| s / n_t).collect()))
}

/// `(1/n) * sum_i (x_i - center)(x_i - center)^T`, exactly symmetric.
pub fn empirical_covariance<T: Real>(data: &Dataset<T>, center: &Vector<T>) -> Result<SymMatrix<T>> {
    let (n, d) = (data.n(), data.d());
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    if center.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: center.dim(),
        });
    }
    let mut acc = vec![T::zero(); d * d];
    let mut centered = vec![T::zero(); d];
    for row in data.rows() {
        for ((c, &x), &m) in centered.iter_mut().zip(row).zip(center.as_slice()) {
            *c = x - m;
        }
        for i in 0..d {
            let ci = centered[i];
            let acc_row = &mut acc[i * d + i..(i + 1) * d];
            for (a, &cj) in acc_row.iter_mut().zip(&centered[i..]) {
                *a = *a + ci * cj;
            }
        }
    }
    let n_t = T::from_usize(n).unwrap();
    for i in 0..d {
        for j in i..d {
            let v = acc[i * d + j] / n_t;
            acc[i * d + j] = v;
            acc[j * d + i] = v;
        }
    }
    Ok(SymMatrix { dim: d, data: acc })
}

/// Deterministic start: the normalized all-ones vector with a small
/// irregular tilt so it is not itself an eigenvector of exchangeable
/// matrices such as `[[2, -1], [-1, 2]]`.
fn start_vector<T: Real>(d: usize) -> Vec<T> {
    let mut v: Vec<T> = (0..d)
        .map(|i| {
            let frac = (i as f64 * 0.618_033_988_749_895).fract();
            T::lit(1.0 + 1e-3 * (frac - 0.5))
        })
        .collect();
    normalize(&mut v);
    v
}

/// Deterministic pseudo-random perturbation used to escape stalls.
fn perturb<T: Real>(v: &mut [T], restart: u64) {
    for (i, x) in v.iter_mut().enumerate() {
        let bits = splitmix64(restart.wrapping_mul(0x1_0000_0001) ^ i as u64);
        let u = (bits >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
        *x = *x + T::lit(1e-3 * u);
    }
    normalize(v);
}

/// Dominant (largest-magnitude) eigenpair by power iteration.
///
/// A zero matrix yields value 0 with the start vector, `converged = true`.
/// If `max_iter` is reached the last Rayleigh quotient is returned with
/// `converged = false`.
pub fn top_eigenpair<T: Real>(m: &SymMatrix<T>, tol: T, max_iter: usize) -> Result<EigenResult<T>> {
    if !(tol > T::zero()) {
        return Err(Error::domain("eigen tolerance must be positive"));
    }
    let d = m.dim();
    let mut v = start_vector::<T>(d);
    if m.is_zero() {
        return Ok(EigenResult {
            value: T::zero(),
            vector: Vector(v),
            iterations: 0,
            converged: true,
        });
    }

    let mut w = vec![T::zero(); d];
    let mut lambda = T::zero();
    let mut prev_lambda = T::nan();
    let mut prev_residual = T::infinity();
    let mut stall = 0usize;
    let mut restarts = 0u64;

    for it in 1..=max_iter {
        m.mul_vec_into(&v, &mut w);
        lambda = dot(&v, &w);
        let residual = w
            .iter()
            .zip(&v)
            .fold(T::zero(), |acc, (&wi, &vi)| {
                acc + (wi - lambda * vi) * (wi - lambda * vi)
            })
            .sqrt();
        let scale = T::one().max(lambda.abs());
        if residual <= tol * scale {
            return Ok(EigenResult {
                value: lambda,
                vector: Vector(v),
                iterations: it,
                converged: true,
            });
        }

        // A stall is a flat Rayleigh quotient whose residual stopped shrinking.
        if (lambda - prev_lambda).abs() < tol * scale && residual >= prev_residual {
            stall += 1;
        } else {
            stall = 0;
        }
        prev_lambda = lambda;
        prev_residual = residual;

        if stall >= STALL_WINDOW {
            restarts += 1;
            perturb(&mut v, restarts);
            stall = 0;
            continue;
        }

        std::mem::swap(&mut v, &mut w);
        if normalize(&mut v).is_zero() {
            // v was in the null space; any other direction carries more mass.
            v = start_vector(d);
            restarts += 1;
            perturb(&mut v, restarts);
        }
    }

    Ok(EigenResult {
        value: lambda,
        vector: Vector(v),
        iterations: max_iter,
        converged: false,
    })
}

/// Largest algebraic eigenpair of a symmetric matrix.
///
/// Plain power iteration finds the largest-magnitude eigenvalue; when that
/// is negative (or did not converge) the matrix is shifted by an upper bound
/// on its spectral radius so that the top of the spectrum dominates.
pub fn max_eigenpair<T: Real>(m: &SymMatrix<T>, tol: T, max_iter: usize) -> Result<EigenResult<T>> {
    let first = top_eigenpair(m, tol, max_iter)?;
    if first.converged && first.value >= T::zero() {
        return Ok(first);
    }
    let shift = m.max_abs_row_sum();
    let mut shifted = top_eigenpair(&m.shifted(shift), tol, max_iter)?;
    shifted.value = m.rayleigh(shifted.vector.as_slice());
    Ok(shifted)
}

/// Positive excess of the top eigenvalue of `sigma - I`, clamped at 0.
pub fn spectral_deviation<T: Real>(sigma: &SymMatrix<T>) -> Result<T> {
    let top = max_eigenpair(sigma, T::lit(DEFAULT_EIGEN_TOL), DEFAULT_EIGEN_MAX_ITER)?;
    Ok((top.value - T::one()).max(T::zero()))
}

/// Spectral norm `||m||_2` of a symmetric matrix: the larger of the top
/// eigenvalues of `m` and `-m`.
pub fn spectral_norm<T: Real>(m: &SymMatrix<T>) -> Result<T> {
    let tol = T::lit(DEFAULT_EIGEN_TOL);
    let hi = max_eigenpair(m, tol, DEFAULT_EIGEN_MAX_ITER)?.value;
    let lo = max_eigenpair(&m.negated(), tol, DEFAULT_EIGEN_MAX_ITER)?.value;
    Ok(hi.max(lo).max(T::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ds(rows: &[&[f64]]) -> Dataset<f64> {
        Dataset::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn mean_single_point() {
        let m = empirical_mean(&ds(&[&[3.0, -1.0]])).unwrap();
        assert_eq!(m.as_slice(), &[3.0, -1.0]);
    }

    #[test]
    fn mean_symmetric_pair() {
        let m = empirical_mean(&ds(&[&[0.0, 0.0], &[2.0, 2.0]])).unwrap();
        assert_eq!(m.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn mean_rejects_empty() {
        let empty = Dataset::<f64>::from_flat(0, 3, vec![]).unwrap();
        assert!(matches!(empirical_mean(&empty), Err(Error::EmptyInput)));
    }

    #[test]
    fn covariance_of_identical_points_is_zero() {
        let data = ds(&[&[1.5, -2.0], &[1.5, -2.0], &[1.5, -2.0]]);
        let c = empirical_covariance(&data, &Vector::new(vec![1.5, -2.0]).unwrap()).unwrap();
        assert!(c.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn covariance_one_dimensional() {
        let data = ds(&[&[-1.0], &[1.0]]);
        let c = empirical_covariance(&data, &Vector::new(vec![0.0]).unwrap()).unwrap();
        assert_eq!(c.as_slice(), &[1.0]);
    }

    #[test]
    fn covariance_errors() {
        let one = ds(&[&[1.0, 2.0]]);
        assert!(matches!(
            empirical_covariance(&one, &Vector::new(vec![0.0, 0.0]).unwrap()),
            Err(Error::InsufficientSamples { .. })
        ));
        let two = ds(&[&[1.0, 2.0], &[0.0, 0.0]]);
        assert!(matches!(
            empirical_covariance(&two, &Vector::new(vec![0.0]).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn eigen_identity() {
        let r = top_eigenpair(&SymMatrix::<f64>::identity(3), 1e-7, 1000).unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eigen_diagonal() {
        let r = top_eigenpair(&SymMatrix::<f64>::diagonal(&[3.0, 1.0]), 1e-10, 1000).unwrap();
        assert_abs_diff_eq!(r.value, 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.vector[0].abs(), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r.vector[1], 0.0, epsilon = 1e-6);
    }

    #[test]
    fn eigen_zero_matrix() {
        let r = top_eigenpair(&SymMatrix::<f64>::diagonal(&[0.0, 0.0, 0.0]), 1e-7, 10).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.converged);
        assert_abs_diff_eq!(r.vector.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eigen_exchangeable_matrix_finds_top() {
        // (1, 1) is an eigenvector for 1; the top eigenvalue 3 lives on (1, -1).
        let m = SymMatrix::from_row_major(2, vec![2.0, -1.0, -1.0, 2.0]).unwrap();
        let r = top_eigenpair(&m, 1e-9, 5000).unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.value, 3.0, epsilon = 1e-8);
    }

    #[test]
    fn eigen_rejects_bad_tol() {
        assert!(top_eigenpair(&SymMatrix::<f64>::identity(2), 0.0, 10).is_err());
    }

    #[test]
    fn max_eigen_prefers_algebraic_top() {
        let m = SymMatrix::diagonal(&[-5.0, 2.0, 1.0]);
        let r = max_eigenpair(&m, 1e-9, 5000).unwrap();
        assert_abs_diff_eq!(r.value, 2.0, epsilon = 1e-7);
    }

    #[test]
    fn deviation_examples() {
        assert_eq!(spectral_deviation(&SymMatrix::<f64>::identity(4)).unwrap(), 0.0);
        let d = spectral_deviation(&SymMatrix::diagonal(&[1.5, 1.0])).unwrap();
        assert_abs_diff_eq!(d, 0.5, epsilon = 1e-9);
        assert_eq!(spectral_deviation(&SymMatrix::diagonal(&[0.5, 0.25])).unwrap(), 0.0);
    }

    #[test]
    fn spectral_norm_takes_larger_side() {
        let m = SymMatrix::diagonal(&[-0.7, 0.2]);
        assert_abs_diff_eq!(spectral_norm(&m).unwrap(), 0.7, epsilon = 1e-8);
    }

    #[test]
    fn symmetry_is_enforced() {
        assert!(SymMatrix::from_row_major(2, vec![1.0, 0.5, 0.4, 1.0]).is_err());
        assert!(SymMatrix::from_row_major(2, vec![1.0, f64::NAN, f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let r = top_eigenpair(&SymMatrix::<f32>::diagonal(&[2.0, 1.0]), 1e-5, 1000).unwrap();
        assert!((r.value - 2.0).abs() < 1e-4);
    }
}
