//! Differentially private mean estimation in high dimensions.
//!
//! A spectral filter removes outliers until the empirical covariance is
//! close to the identity; the filtered mean then has an error bound that
//! does not depend on the dimension, and twice that bound is used as the l2
//! sensitivity of a Gaussian mechanism. A range-clamped winsorized mean is
//! provided as a baseline whose noise grows with `sqrt(d)`.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases below fix it to `f64`, which is what the harness uses.
//!
//! ```
//! use dp_robust_mean::{datagen, estimators, RobustConfig, Vector};
//!
//! let data = datagen::sample_gaussian(500, 8, &Vector::zeros(8), 1).unwrap();
//! let cfg = RobustConfig::new(0.1, 0.05, 2.0).unwrap();
//! let report = estimators::dp_robust_mean(&data, &cfg, 1.0, 42).unwrap();
//! assert_eq!(report.private_mean.dim(), 8);
//! ```

// Negated comparisons such as `!(x > 0)` are used on purpose: they also
// reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod dataset;
pub mod error;
pub mod estimators;
pub mod filter;
pub mod harness;
pub mod linalg;
pub mod privacy;
pub mod scalar;
pub mod seed;
pub mod sensitivity;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use estimators::{EstimateReport, Method, ReleaseMode, WinsorizeConfig};
pub use filter::{FilterDiagnostics, FilterOutcome, FilterParams, Termination};
pub use linalg::{EigenResult, SymMatrix, Vector};
pub use privacy::{NoiseSpec, PrivacyParams};
pub use scalar::Real;
pub use sensitivity::{RobustConfig, SensitivityBound};

pub type Dataset64 = Dataset<f64>;
pub type Vector64 = Vector<f64>;
pub type SymMatrix64 = SymMatrix<f64>;
pub type RobustConfig64 = RobustConfig<f64>;
pub type PrivacyParams64 = PrivacyParams<f64>;
pub type EstimateReport64 = EstimateReport<f64>;

pub type Dataset32 = Dataset<f32>;
pub type Vector32 = Vector<f32>;
pub type SymMatrix32 = SymMatrix<f32>;
pub type RobustConfig32 = RobustConfig<f32>;
