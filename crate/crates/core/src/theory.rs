//! Bias theory for the naive augmented estimator: the alpha/beta bias
//! coefficients, the CATE-vs-CDF covariance functional, the misselection
//! condition for model pairs, and the four-term pooled-AUROC mixture.
//!
//! Sign convention: `naive_bias` returns `alpha * delta - beta * sigma`,
//! the expected amount by which the naive estimate falls *short of* the
//! true AUROC (truth minus expected estimate). Equivalently the expected
//! naive estimate is `(1 - alpha) * truth + 0.5 * alpha + beta * sigma`.

use serde::{Deserialize, Serialize};

use crate::error::{EvalError, Result};

/// Population-level constants of a trial: randomization probability and
/// the outcome rates of the two arms.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PopulationParams {
    pub pi: f64,
    pub mu0: f64,
    pub mu1: f64,
    /// Average treatment effect, mu1 - mu0.
    pub tau: f64,
}

impl PopulationParams {
    pub fn new(pi: f64, mu0: f64, mu1: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&pi) || !pi.is_finite() {
            return Err(EvalError::InvalidInput(format!("pi {pi} outside [0,1]")));
        }
        for (name, v) in [("mu0", mu0), ("mu1", mu1)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(EvalError::InvalidInput(format!("{name} {v} outside (0,1)")));
            }
        }
        Ok(Self { pi, mu0, mu1, tau: mu1 - mu0 })
    }
}

/// Bias coefficients of the naive augmented estimator:
/// alpha = pi*tau*(1-mu0-mu1) / (mu1*(1-mu1)), beta = pi / (mu1*(1-mu1)).
/// alpha < 1 and beta > 0 for any valid parameters.
pub fn bias_params(p: &PopulationParams) -> (f64, f64) {
    let denom = p.mu1 * (1.0 - p.mu1);
    let alpha = p.pi * p.tau * (1.0 - p.mu0 - p.mu1) / denom;
    let beta = p.pi / denom;
    (alpha, beta)
}

/// Covariance between per-sample CATE values and score-CDF values,
/// denominator n (a population functional plugged into a population
/// formula).
pub fn sigma_f(tau_values: &[f64], cdf_values: &[f64]) -> Result<f64> {
    if tau_values.len() != cdf_values.len() {
        return Err(EvalError::LengthMismatch {
            left: tau_values.len(),
            right: cdf_values.len(),
            context: "tau values vs cdf values",
        });
    }
    if tau_values.len() < 2 {
        return Err(EvalError::InvalidInput("sigma_f needs at least 2 values".into()));
    }
    let n = tau_values.len() as f64;
    let mean_t = tau_values.iter().sum::<f64>() / n;
    let mean_c = cdf_values.iter().sum::<f64>() / n;
    let cov = tau_values
        .iter()
        .zip(cdf_values)
        .map(|(t, c)| (t - mean_t) * (c - mean_c))
        .sum::<f64>()
        / n;
    Ok(cov)
}

/// Predicted shortfall of the naive augmented estimate below the true
/// AUROC: alpha * delta_f - beta * sigma_f, with delta_f the true AUROC
/// minus 0.5.
pub fn naive_bias(p: &PopulationParams, delta_f: f64, sigma_f: f64) -> f64 {
    let (alpha, beta) = bias_params(p);
    alpha * delta_f - beta * sigma_f
}

/// Condition under which the naive augmented estimator provably prefers
/// the truly-worse model: given expected naive estimates ordered
/// theta_hat_1 > theta_hat_2, misselection holds iff
/// theta_hat_1 - theta_hat_2 < beta * (sigma_1 - sigma_2).
pub fn misselection_condition(
    theta_hat_1: f64,
    theta_hat_2: f64,
    beta: f64,
    sigma_1: f64,
    sigma_2: f64,
) -> Result<bool> {
    if !theta_hat_1.is_finite() || !theta_hat_2.is_finite() || theta_hat_1 <= theta_hat_2 {
        return Err(EvalError::InvalidInput(format!(
            "misselection_condition needs theta_hat_1 > theta_hat_2 (got {theta_hat_1} vs {theta_hat_2})"
        )));
    }
    Ok(theta_hat_1 - theta_hat_2 < beta * (sigma_1 - sigma_2))
}

/// Fraction of unordered model pairs meeting the misselection condition,
/// each pair ordered by its naive estimate first. Pairs with exactly
/// equal estimates cannot be strictly ordered and are counted as not
/// triggering.
pub fn misselection_rate(models: &[(f64, f64)], beta: f64) -> Result<f64> {
    if models.len() < 2 {
        return Err(EvalError::InvalidInput("misselection_rate needs at least 2 models".into()));
    }
    let mut triggered = 0usize;
    let mut pairs = 0usize;
    for i in 0..models.len() {
        for j in (i + 1)..models.len() {
            pairs += 1;
            let (a, b) = if models[i].0 > models[j].0 {
                (models[i], models[j])
            } else if models[j].0 > models[i].0 {
                (models[j], models[i])
            } else {
                continue;
            };
            if misselection_condition(a.0, b.0, beta, a.1, b.1)? {
                triggered += 1;
            }
        }
    }
    Ok(triggered as f64 / pairs as f64)
}

/// Four-term mixture of cross-arm AUROCs that the pooled estimator
/// averages over: (1-pi)^2 auc_00 + pi^2 auc_11 + (pi-pi^2)(auc_01 +
/// auc_10), where auc_01 pairs control positives with treated negatives
/// and auc_10 the reverse.
pub fn all_data_mixture(auc_00: f64, auc_11: f64, auc_01: f64, auc_10: f64, pi: f64) -> f64 {
    let q = 1.0 - pi;
    q * q * auc_00 + pi * pi * auc_11 + (pi - pi * pi) * (auc_01 + auc_10)
}
