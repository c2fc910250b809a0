//! Exact privacy analysis of concurrently composed interactive mechanisms.
//!
//! Mechanisms are finite-horizon [`InteractiveSystem`]s. The crate computes
//! exact transcript laws against deterministic adversaries, verifies
//! approximate-DP and Rényi-DP claims by sweeping every adversary, builds the
//! randomized-response decomposition of an `(ε, δ)` pair, runs the Rényi
//! budget monitor, and provides composition calculators and a small mechanism
//! zoo with a Monte Carlo auditor.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod budget;
pub mod calculators;
pub mod decompose;
pub mod divergence;
pub mod engine;
pub mod error;
pub mod fixtures;
pub mod mechanisms;
pub mod renyi;
pub mod space;
pub mod system;

pub use adversary::{Adversary, Entry, Move, Shape, Transcript};
pub use budget::PrivacyBudget;
pub use engine::{Setting, TranscriptDistribution};
pub use error::{Error, Result};
pub use space::Space;
pub use system::{compose, InteractiveSystem, SubMeasureSystem, SystemPair, ValidationReport};

/// Tolerance for row sums when validating systems.
pub const VALIDITY_TOL: f64 = 1e-12;

/// Absolute tolerance for equality assertions between computed quantities.
pub const EQ_TOL: f64 = 1e-9;

/// Default cap on the number of adversaries an exhaustive sweep may visit.
pub const DEFAULT_CAP: u128 = 10_000_000;
