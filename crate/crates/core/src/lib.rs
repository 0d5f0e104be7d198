//! Benign overfitting of the minimum-norm interpolant: spectra, random
//! designs, the interpolator itself, closed-form bounds, Monte Carlo
//! estimators and an experiment harness.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod designs;
pub mod interpolator;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod rng;
pub mod spectra;

pub use error::{Error, Result};
