//! Robustness and transferability audit for feature-importance explanations
//! of tabular regression models.
//!
//! The library trains from-scratch regression models (CART trees, random
//! forests, multilayer perceptrons) on match-event count data, explains them
//! with interventional Shapley values and Counterfactual Impact Scores, and
//! measures how stable those explanations are across training seeds, data
//! domains, and explanation methods.
//!
//! The crate is organised around a five-experiment audit:
//!
//! 1. predictive validity (MAE/RMSE across seeds),
//! 2. per-domain global feature importance,
//! 3. seed-wise ranking stability,
//! 4. cross-domain structural agreement,
//! 5. explanation-method agreement (Shapley vs CIS).
//!
//! Every stage is deterministic given its configuration and seeds. See the
//! `examples/` directory for runnable entry points into each capability and
//! the `xaudit` binary for the file-based pipeline.

pub mod attribution;
pub mod audit;
pub mod cis;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod models;
pub mod report;
pub mod rng;
pub mod robustness;
pub mod synth;

pub use error::{Error, Result};
