//! Counterfactual explanations for tabular inputs with missing values.
//!
//! The crate bundles everything needed to study how imputation error breaks
//! recourse:
//!
//! - [`data`]: CSV ingestion, normalization, splits, MCAR masking, fixtures
//! - [`model`]: two-layer ReLU classifier with exact, gradient and interval
//!   forward passes
//! - [`impute`]: mean, kNN and chained-equation imputers
//! - [`solver`]: simplex + branch-and-bound search for ℓ1-minimal
//!   counterfactuals
//! - [`robustness`]: weight-interval certification, model sets, stability
//! - [`explainers`]: the ten counterfactual methods
//! - [`metrics`]: validity, recourse validity, cost, LOF, Mann–Whitney U
//! - [`harness`]: benchmark grid, sweeps, aggregation and reports
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod data;
pub mod explainers;
pub mod harness;
pub mod impute;
pub mod metrics;
pub mod model;
pub mod robustness;
pub mod solver;
