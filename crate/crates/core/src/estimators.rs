//! AUROC estimators over trial data: control-only standard, treated-only,
//! naive augmented, pooled all-data, and the nuisance-weighted augmented
//! estimator with its omega path, tau path, and averaged combination.

use serde::{Deserialize, Serialize};

use crate::data::{
    split_by_treatment, AucEstimate, Method, NuisanceEstimates, RctDataset, ScoreSet,
    TreatmentSplit, PROB_EPSILON,
};
use crate::error::{Arm, EvalError, Result};
use crate::metrics::{auc, empirical_cdf, weighted_auc, TiePolicy};

/// How the two nuisance-weighted paths combine into the alternative
/// treated-arm estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NpwCombine {
    /// (omega path + tau path) / 2.
    #[default]
    Average,
    OmegaOnly,
    TauOnly,
}

/// Settings for the nuisance-weighted estimator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NpwConfig {
    pub combine: NpwCombine,
    pub tie: TiePolicy,
    /// Clip the tau-path value into [0,1] before use. Off by default:
    /// clipping before averaging would re-introduce bias.
    pub clip_tau_path: bool,
    pub epsilon: f64,
}

impl Default for NpwConfig {
    fn default() -> Self {
        Self {
            combine: NpwCombine::Average,
            tie: TiePolicy::Strict,
            clip_tau_path: false,
            epsilon: PROB_EPSILON,
        }
    }
}

fn split_scores(outcomes: &[u8], scores: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (&y, &s) in outcomes.iter().zip(scores) {
        if y == 1 {
            pos.push(s);
        } else {
            neg.push(s);
        }
    }
    (pos, neg)
}

fn arm_auc(outcomes: &[u8], scores: &[f64], arm: Arm, tie: TiePolicy) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(EvalError::EmptyArm(arm));
    }
    let (pos, neg) = split_scores(outcomes, scores);
    if pos.is_empty() {
        return Err(EvalError::SingleClassArm { arm, missing: "positive" });
    }
    if neg.is_empty() {
        return Err(EvalError::SingleClassArm { arm, missing: "negative" });
    }
    auc(&pos, &neg, tie)
}

fn check_scores(dataset: &RctDataset, scores: &ScoreSet) -> Result<()> {
    if scores.len() != dataset.len() {
        return Err(EvalError::LengthMismatch {
            left: scores.len(),
            right: dataset.len(),
            context: "scores vs dataset size",
        });
    }
    Ok(())
}

/// Standard estimator: AUROC over control samples only. Unbiased for the
/// no-intervention AUROC but ignores the treated arm.
pub fn auc_standard(dataset: &RctDataset, scores: &ScoreSet, tie: TiePolicy) -> Result<AucEstimate> {
    check_scores(dataset, scores)?;
    let split = split_by_treatment(dataset);
    let value = arm_auc(
        &split.control.outcomes,
        &split.control.gather(&scores.scores),
        Arm::Control,
        tie,
    )?;
    Ok(AucEstimate::new(Method::Standard, value, split.control.len(), split.treated.len()))
}

/// AUROC over treated samples only (the biased ingredient of the naive
/// estimator).
pub fn auc_treated(dataset: &RctDataset, scores: &ScoreSet, tie: TiePolicy) -> Result<AucEstimate> {
    check_scores(dataset, scores)?;
    let split = split_by_treatment(dataset);
    let value = arm_auc(
        &split.treated.outcomes,
        &split.treated.gather(&scores.scores),
        Arm::Treated,
        tie,
    )?;
    // Method tag reuses Naive's treated component; the estimate carries
    // its own meaning through the diagnostics key.
    Ok(AucEstimate::new(Method::Naive, value, split.control.len(), split.treated.len())
        .with_diag("treated_arm_only", 1.0))
}

/// Naive augmented estimator: (1-pi) * control AUROC + pi * treated
/// AUROC. At pi = 0 or 1 it degenerates to the single available arm.
pub fn auc_naive(dataset: &RctDataset, scores: &ScoreSet, tie: TiePolicy) -> Result<AucEstimate> {
    check_scores(dataset, scores)?;
    let pi = dataset.randomization_prob;
    let split = split_by_treatment(dataset);
    let control_scores = split.control.gather(&scores.scores);
    let treated_scores = split.treated.gather(&scores.scores);
    let mut est = AucEstimate::new(Method::Naive, 0.0, split.control.len(), split.treated.len());
    est.value = if pi == 0.0 {
        arm_auc(&split.control.outcomes, &control_scores, Arm::Control, tie)?
    } else if pi == 1.0 {
        arm_auc(&split.treated.outcomes, &treated_scores, Arm::Treated, tie)?
    } else {
        let c = arm_auc(&split.control.outcomes, &control_scores, Arm::Control, tie)?;
        let t = arm_auc(&split.treated.outcomes, &treated_scores, Arm::Treated, tie)?;
        est = est.with_diag("control_auc", c).with_diag("treated_auc", t);
        (1.0 - pi) * c + pi * t
    };
    Ok(est)
}

/// Pooled estimator: AUROC over all samples, treatment ignored.
pub fn auc_all(dataset: &RctDataset, scores: &ScoreSet, tie: TiePolicy) -> Result<AucEstimate> {
    check_scores(dataset, scores)?;
    let (pos, neg) = split_scores(&dataset.outcome, &scores.scores);
    if pos.is_empty() {
        return Err(EvalError::SingleClassArm { arm: Arm::Pooled, missing: "positive" });
    }
    if neg.is_empty() {
        return Err(EvalError::SingleClassArm { arm: Arm::Pooled, missing: "negative" });
    }
    let value = auc(&pos, &neg, tie)?;
    let split = split_by_treatment(dataset);
    Ok(AucEstimate::new(Method::AllData, value, split.control.len(), split.treated.len()))
}

/// Treated-arm plug-in aggregates: mu1 from observed treated outcomes,
/// tau_bar from the CATE estimates over treated samples, mu0 = mu1 -
/// tau_bar clamped. This keeps the alternative estimate a function of
/// treated data plus nuisance models only.
fn plugin_aggregates(split: &TreatmentSplit, tau_treated: &[f64], epsilon: f64) -> (f64, f64, f64) {
    let k = split.treated.len() as f64;
    let mu1 = split.treated.outcomes.iter().map(|&y| y as f64).sum::<f64>() / k;
    let tau_bar = tau_treated.iter().sum::<f64>() / k;
    let mu0 = (mu1 - tau_bar).clamp(epsilon, 1.0 - epsilon);
    (mu1, mu0, tau_bar)
}

/// Omega-path alternative estimate: a weighted AUROC over the treated
/// arm with positive-side weights omega_hat and negative-side weights
/// 1 - omega_hat, both sides the full treated list, self-pairs excluded,
/// self-normalized.
pub fn auc_npw_omega(
    dataset: &RctDataset,
    scores: &ScoreSet,
    nuisance: &NuisanceEstimates,
    tie: TiePolicy,
) -> Result<AucEstimate> {
    check_scores(dataset, scores)?;
    let split = split_by_treatment(dataset);
    if split.treated.is_empty() {
        return Err(EvalError::EmptyArm(Arm::Treated));
    }
    let (omega, _tau) = nuisance.treated_values(&split)?;
    let treated_scores = split.treated.gather(&scores.scores);
    let neg_weights: Vec<f64> = omega.iter().map(|o| 1.0 - o).collect();
    let value =
        weighted_auc(&treated_scores, &omega, &treated_scores, &neg_weights, tie, true)?;
    Ok(
        AucEstimate::new(Method::NpwOmegaOnly, value, split.control.len(), split.treated.len())
            .with_diag("omega_weight_total", omega.iter().sum::<f64>()),
    )
}

/// Tau-path alternative estimate, in closed form:
///
/// ```text
/// mu1(1-mu1) * AUC_treated / (mu0(1-mu0))
///   + (mu1 - 0.5*tau_bar) * tau_bar / (mu0(1-mu0))
///   - (1 / (mu0(1-mu0) * k)) * sum_i tau_i * F(s_i)
/// ```
///
/// with F the empirical CDF of treated scores against themselves and k
/// the treated-arm size. The value may leave [0,1]; it is returned raw
/// unless `clip` is set.
pub fn auc_npw_tau(
    dataset: &RctDataset,
    scores: &ScoreSet,
    nuisance: &NuisanceEstimates,
    tie: TiePolicy,
    clip: bool,
) -> Result<AucEstimate> {
    auc_npw_tau_eps(dataset, scores, nuisance, tie, clip, PROB_EPSILON)
}

fn auc_npw_tau_eps(
    dataset: &RctDataset,
    scores: &ScoreSet,
    nuisance: &NuisanceEstimates,
    tie: TiePolicy,
    clip: bool,
    epsilon: f64,
) -> Result<AucEstimate> {
    check_scores(dataset, scores)?;
    let split = split_by_treatment(dataset);
    if split.treated.is_empty() {
        return Err(EvalError::EmptyArm(Arm::Treated));
    }
    let (_omega, tau) = nuisance.treated_values(&split)?;
    let treated_scores = split.treated.gather(&scores.scores);
    let treated_auc = arm_auc(&split.treated.outcomes, &treated_scores, Arm::Treated, tie)?;
    let (mu1, mu0, tau_bar) = plugin_aggregates(&split, &tau, epsilon);
    let denom = mu0 * (1.0 - mu0);
    if denom < epsilon * epsilon {
        return Err(EvalError::DegenerateBaselineRate);
    }
    let k = split.treated.len() as f64;
    let cdf = empirical_cdf(&treated_scores, &treated_scores, tie)?;
    let cdf_term: f64 = tau.iter().zip(&cdf).map(|(t, f)| t * f).sum::<f64>() / k;
    let raw = (mu1 * (1.0 - mu1) * treated_auc + (mu1 - 0.5 * tau_bar) * tau_bar - cdf_term)
        / denom;
    let value = if clip { raw.clamp(0.0, 1.0) } else { raw };
    Ok(
        AucEstimate::new(Method::NpwTauOnly, value, split.control.len(), split.treated.len())
            .with_diag("mu1_hat", mu1)
            .with_diag("mu0_hat", mu0)
            .with_diag("tau_bar_hat", tau_bar)
            .with_diag("treated_auc", treated_auc)
            .with_diag("cdf_term", cdf_term),
    )
}

/// Nuisance-weighted augmented estimator: (1-pi) * standard + pi * alt,
/// where alt is the omega path, the tau path, or their average per
/// `config.combine`. At pi = 0 it equals the standard estimate
/// regardless of nuisances.
pub fn auc_npw(
    dataset: &RctDataset,
    scores: &ScoreSet,
    nuisance: &NuisanceEstimates,
    config: &NpwConfig,
) -> Result<AucEstimate> {
    check_scores(dataset, scores)?;
    let pi = dataset.randomization_prob;
    let split = split_by_treatment(dataset);
    let std_part = if pi < 1.0 {
        arm_auc(
            &split.control.outcomes,
            &split.control.gather(&scores.scores),
            Arm::Control,
            config.tie,
        )?
    } else {
        0.0
    };
    if pi == 0.0 {
        return Ok(AucEstimate::new(
            Method::Npw,
            std_part,
            split.control.len(),
            split.treated.len(),
        ));
    }

    let mut est = AucEstimate::new(Method::Npw, 0.0, split.control.len(), split.treated.len());
    let alt = match config.combine {
        NpwCombine::OmegaOnly => {
            let o = auc_npw_omega(dataset, scores, nuisance, config.tie)?;
            est = est.with_diag("omega_path", o.value);
            o.value
        }
        NpwCombine::TauOnly => {
            let t = auc_npw_tau_eps(
                dataset,
                scores,
                nuisance,
                config.tie,
                config.clip_tau_path,
                config.epsilon,
            )?;
            est = est.with_diag("tau_path", t.value);
            t.value
        }
        NpwCombine::Average => {
            let o = auc_npw_omega(dataset, scores, nuisance, config.tie)?;
            let t = auc_npw_tau_eps(
                dataset,
                scores,
                nuisance,
                config.tie,
                config.clip_tau_path,
                config.epsilon,
            )?;
            est = est.with_diag("omega_path", o.value).with_diag("tau_path", t.value);
            0.5 * (o.value + t.value)
        }
    };
    est.value = (1.0 - pi) * std_part + pi * alt;
    let method = match config.combine {
        NpwCombine::Average => Method::Npw,
        NpwCombine::OmegaOnly => Method::NpwOmegaOnly,
        NpwCombine::TauOnly => Method::NpwTauOnly,
    };
    est.method = method;
    Ok(est)
}

/// Dispatch an estimate by method tag. Nuisance-weighted methods require
/// `nuisance`; the others ignore it.
pub fn estimate(
    dataset: &RctDataset,
    scores: &ScoreSet,
    method: Method,
    nuisance: Option<&NuisanceEstimates>,
    npw: &NpwConfig,
) -> Result<AucEstimate> {
    match method {
        Method::Standard => auc_standard(dataset, scores, npw.tie),
        Method::Naive => auc_naive(dataset, scores, npw.tie),
        Method::AllData => auc_all(dataset, scores, npw.tie),
        Method::Npw | Method::NpwOmegaOnly | Method::NpwTauOnly => {
            let nuisance = nuisance.ok_or_else(|| {
                EvalError::InvalidInput(format!("method {method} requires nuisance estimates"))
            })?;
            let combine = match method {
                Method::Npw => NpwCombine::Average,
                Method::NpwOmegaOnly => NpwCombine::OmegaOnly,
                _ => NpwCombine::TauOnly,
            };
            auc_npw(dataset, scores, nuisance, &NpwConfig { combine, ..npw.clone() })
        }
    }
}
