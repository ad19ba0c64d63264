//! Stable, sparse, interpretable risk-prediction rules from tabular
//! binary-outcome data.
//!
//! The pipeline: load a feature table ([`dataset`]), build a feature
//! similarity graph ([`similarity`]), fit a stabilized sparse logistic
//! regression ([`sslr`]), distill it into an integer score card with a
//! calibrated risk curve via bootstrap averaging ([`rulegen`]), and compare
//! against a randomized gradient-boosted ensemble ([`rgb`]) under the
//! balanced-test evaluation protocol ([`metrics`]). The [`synth`] module
//! generates correlated benchmark data with known ground truth.

pub mod dataset;
pub mod error;
pub mod metrics;
pub mod rgb;
pub mod rulegen;
pub mod seeds;
pub mod similarity;
pub mod sslr;
pub mod synth;

pub use error::{Error, Result};
