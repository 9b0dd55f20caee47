//! Tests for principal directions under weakly identified spiked covariance
//! models.
//!
//! The crate bundles the finite-sample statistics (Anderson's likelihood
//! ratio test, the Le Cam optimal test built on Gram-Schmidt complements,
//! their pseudo-Gaussian versions, the optimal and oracle statistics), the
//! random-matrix limit laws needed to understand where Anderson's test breaks
//! down, and a seeded Monte Carlo harness.
//!
//! ```
//! use weakpca::{linalg::Matrix, statistics};
//!
//! let s = Matrix::from_diag(&[3.0, 2.0, 1.0]);
//! let summary = statistics::SampleSummary::from_covariance(50, s).unwrap();
//! let q = statistics::hpv_statistic(&summary, &[1.0, 0.0, 0.0], 1).unwrap();
//! assert_eq!(q, 0.0);
//! ```

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod asymptotics;
pub mod data;
pub mod distributions;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod statistics;

pub use error::{Error, Result};
pub use rng::Rng;
