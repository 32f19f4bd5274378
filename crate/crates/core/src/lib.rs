//! Value-oriented prediction-interval (PI) forecasting for a virtual power
//! plant that runs a two-timescale operation: a day-ahead robust dispatch
//! with recourse against the PI, and a real-time settlement of the realized
//! wind deviation.
//!
//! Instead of tuning PI bounds for statistical quality alone, a contextual
//! bandit selects the lower-quantile proportion per sample, quantile
//! regression networks emit the bounds, and the dispatch cost induced by the
//! interval feeds back as the bandit reward. The crate also ships
//! quality-oriented baselines (central PI, naive persistence, deterministic
//! point forecast) and the evaluation metrics used to compare them.
//!
//! Modules map onto the pipeline stages:
//!
//! - [`data`]: dataset ingestion, synthetic wind generation, splitting,
//!   feature scaling.
//! - [`nn`]: minimal MLP engine with manual backprop, Adam, and a dueling
//!   Q-head.
//! - [`qr`]: the bank of quantile-regression models and interval assembly.
//! - [`agent`]: the value-based contextual bandit over proportions.
//! - [`dispatch`]: exact solvers for the day-ahead robust program, real-time
//!   settlement, and the monetary score.
//! - [`metrics`]: Winkler score, average coverage deviation, width, and the
//!   value metrics.
//! - [`baselines`]: quality-oriented comparison forecasters.
//! - [`harness`]: the training loop, evaluation runs, sweeps, and artifact
//!   I/O behind the CLI.

// Validations use `!(x > 0.0)` deliberately: unlike `x <= 0.0`, the negated
// form also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod baselines;
pub mod data;
pub mod dispatch;
mod error;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod qr;
pub mod replay;
pub mod seeds;

pub use error::{Error, Result};
