//! Hurst exponent estimation from noisy self-similar signals.
//!
//! The pieces, bottom up: [`special`] (digamma, trigamma), [`fbm`]
//! (fractional Brownian motion synthesis), [`wavelet`] (periodic orthogonal
//! DWT and level energies), [`estimators`] (spectrum regression and the
//! pairwise ALPHEE / NC-ALPHEE estimators), [`aggregation`] (weighted
//! statistics and a feedforward aggregator), [`pipeline`] (signal to
//! estimate), [`io`] and [`harness`] (seeded Monte Carlo sweeps).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregation;
pub mod error;
pub mod estimators;
pub mod fbm;
pub mod harness;
pub mod io;
pub mod pipeline;
pub mod special;
pub mod wavelet;

pub use error::{HurstError, Result};
