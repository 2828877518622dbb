//! Estimate a predictive model's AUROC under no-intervention using all
//! data from a randomized controlled trial.
//!
//! The standard approach scores the control arm only, which is unbiased
//! but wastes the treated arm. Naively averaging per-arm AUROCs brings
//! the treated data in but is biased because the intervention moves
//! outcomes. This crate implements both baselines, the pooled all-data
//! estimate, and a nuisance-weighted augmented estimator that reweights
//! the treated arm to mimic the no-intervention positive and negative
//! distributions, along with the bias theory, a synthetic
//! potential-outcomes cohort generator, nuisance estimation, and a
//! replicated Monte Carlo evaluation harness.

pub mod data;
pub mod dgp;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod metrics;
pub mod nuisance;
pub mod theory;

pub use data::{
    AucEstimate, BiasDiagnostics, Method, NuisanceEstimates, NuisanceScope, RctDataset, ScoreSet,
    Violation, PROB_EPSILON,
};
pub use error::{EvalError, Result};
pub use estimators::{NpwCombine, NpwConfig};
pub use metrics::TiePolicy;
