//! Collective robustness certificates for multi-output classifiers under
//! localized randomized smoothing.

// `!(x > 0.0)` is used on purpose: NaN has to fail parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod base_certs;
pub mod cli_io;
pub mod collective;
pub mod distributions;
pub mod error;
pub mod models;
pub mod monte_carlo;
pub mod numerics;
pub mod oracle;

pub use error::{Error, Result};
