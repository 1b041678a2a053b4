//! Estimation of affine transformations between two noisy measurement
//! spaces of identical dimension (sensor-to-sensor software calibration).
//!
//! The crate provides three estimators for the map `T(x) = A x + b` relating
//! paired, noisy sample sets `X` and `Y`:
//!
//! * [`estimate::fit_gleser_watson`] — closed-form maximum likelihood via the
//!   leading eigenvectors of `X^T X + Y^T Y`, with optional augmentation-row
//!   denoising;
//! * [`estimate::fit_least_squares`] — multivariate regression on augmented
//!   data, `B = Y X^T (X X^T)^-1`;
//! * [`estimate::fit_hybrid`] — the least-squares transform combined with the
//!   eigenprojection estimate of the origins.
//!
//! [`simulate`] contains a reproducible Monte Carlo harness for comparing the
//! estimators over a noise grid. The crate is `no_std` (alloc required); IO,
//! file formats, and the CLI live in the companion `calib-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod data;
pub mod eigen;
pub mod error;
pub mod estimate;
pub mod matrix;
pub mod simulate;
pub mod solve;

pub use data::{
    AffineTransform, AugmentedData, AugmentedTransform, CalibrationResult, DataMatrix, Method,
};
pub use error::{Error, Result};
pub use matrix::Matrix;
