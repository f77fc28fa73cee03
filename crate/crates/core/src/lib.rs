//! Long-horizon policy-value estimation from short-horizon on-policy data.
//!
//! The problem setting: a new policy has only been run for a few steps
//! (short prefixes, no outcomes), while historical data from an older policy
//! carries full-horizon returns. This crate implements regression-based
//! ("soft"), density-ratio-weighted, and cross-fitted doubly robust value
//! estimators over that data layout, together with two synthetic domains, a
//! finite-sample bound auditor, t-test utilities, and a seeded benchmark
//! harness that reproduces the reference experiment tables.

pub mod bench;
pub mod data;
pub mod density_ratio;
pub mod error;
pub mod estimators;
pub mod regression;
pub mod rng;
pub mod sepsis;
pub mod stats;
pub mod theory;
pub mod toy;

pub use error::{Error, Result};
