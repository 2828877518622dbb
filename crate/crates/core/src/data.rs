//! Shared data model: trial datasets, model scores, nuisance estimates,
//! and estimator outputs.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{EvalError, Result};

/// Clamp bound for estimated probabilities. Estimated nuisances can hit
/// 0 or 1 even though the data-generating process keeps outcome
/// probabilities strictly inside (0,1).
pub const PROB_EPSILON: f64 = 1e-6;

/// Clamp a probability into `[PROB_EPSILON, 1 - PROB_EPSILON]`.
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON)
}

/// One randomized trial: covariates, observed binary outcome, and the
/// randomized treatment flag per sample, plus the design-time
/// randomization probability.
///
/// Fields are raw on purpose: [`RctDataset::validate`] reports violations
/// instead of making them unrepresentable, so ingested data can be
/// inspected before use.
#[derive(Debug, Clone)]
pub struct RctDataset {
    /// n x p covariate matrix. p may be zero when estimation is
    /// score-based only.
    pub features: Array2<f64>,
    /// Observed outcome per sample, 0 or 1.
    pub outcome: Vec<u8>,
    /// Treatment flag per sample, 0 or 1.
    pub treatment: Vec<u8>,
    /// Randomization probability pi, known by design. Stored as given,
    /// not re-estimated from arm frequencies.
    pub randomization_prob: f64,
}

/// A single dataset-validation violation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    LengthMismatch { outcome: usize, treatment: usize, feature_rows: usize },
    NonBinaryOutcome { index: usize, value: u8 },
    NonBinaryTreatment { index: usize, value: u8 },
    EmptyControlArm,
    EmptyTreatmentArm,
    PiOutsideOpenInterval { pi: f64 },
    NonFiniteFeature { row: usize, col: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::LengthMismatch { outcome, treatment, feature_rows } => write!(
                f,
                "length mismatch: outcome {outcome}, treatment {treatment}, feature rows {feature_rows}"
            ),
            Violation::NonBinaryOutcome { index, value } => {
                write!(f, "non-binary outcome at index {index}: {value}")
            }
            Violation::NonBinaryTreatment { index, value } => {
                write!(f, "non-binary treatment at index {index}: {value}")
            }
            Violation::EmptyControlArm => write!(f, "empty control arm"),
            Violation::EmptyTreatmentArm => write!(f, "empty treatment arm"),
            Violation::PiOutsideOpenInterval { pi } => {
                write!(f, "randomization probability {pi} outside (0,1)")
            }
            Violation::NonFiniteFeature { row, col } => {
                write!(f, "non-finite feature at row {row}, column {col}")
            }
        }
    }
}

impl RctDataset {
    /// Checked constructor: rejects hard structural problems up front.
    /// pi may sit at 0 or 1 (estimators short-circuit there); values
    /// outside `[0,1]` are rejected.
    pub fn new(
        features: Array2<f64>,
        outcome: Vec<u8>,
        treatment: Vec<u8>,
        randomization_prob: f64,
    ) -> Result<Self> {
        let ds = Self { features, outcome, treatment, randomization_prob };
        if !(0.0..=1.0).contains(&randomization_prob) {
            return Err(EvalError::InvalidInput(format!(
                "randomization probability {randomization_prob} outside [0,1]"
            )));
        }
        let violations = ds.validate();
        let hard = violations.iter().find(|v| {
            matches!(
                v,
                Violation::LengthMismatch { .. }
                    | Violation::NonBinaryOutcome { .. }
                    | Violation::NonBinaryTreatment { .. }
                    | Violation::NonFiniteFeature { .. }
            )
        });
        if let Some(v) = hard {
            return Err(EvalError::InvalidInput(v.to_string()));
        }
        Ok(ds)
    }

    /// Dataset with an empty (`n x 0`) covariate matrix, for purely
    /// score-based estimation paths such as bootstrap resampling.
    pub fn without_features(outcome: Vec<u8>, treatment: Vec<u8>, pi: f64) -> Result<Self> {
        let n = outcome.len();
        Self::new(Array2::zeros((n, 0)), outcome, treatment, pi)
    }

    pub fn len(&self) -> usize {
        self.outcome.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcome.is_empty()
    }

    /// Empirical treated fraction, exposed for diagnostics only;
    /// estimators use `randomization_prob`.
    pub fn empirical_treated_rate(&self) -> f64 {
        if self.treatment.is_empty() {
            return f64::NAN;
        }
        self.treatment.iter().map(|&t| t as f64).sum::<f64>() / self.treatment.len() as f64
    }

    /// Side-effect-free validation; returns every violation found.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.outcome.len();
        if self.treatment.len() != n || self.features.nrows() != n {
            out.push(Violation::LengthMismatch {
                outcome: n,
                treatment: self.treatment.len(),
                feature_rows: self.features.nrows(),
            });
            // Arm checks below would index mismatched vectors.
            return out;
        }
        for (i, &y) in self.outcome.iter().enumerate() {
            if y > 1 {
                out.push(Violation::NonBinaryOutcome { index: i, value: y });
            }
        }
        for (i, &t) in self.treatment.iter().enumerate() {
            if t > 1 {
                out.push(Violation::NonBinaryTreatment { index: i, value: t });
            }
        }
        if !self.treatment.contains(&0) {
            out.push(Violation::EmptyControlArm);
        }
        if !self.treatment.contains(&1) {
            out.push(Violation::EmptyTreatmentArm);
        }
        let pi = self.randomization_prob;
        if !(pi > 0.0 && pi < 1.0) {
            out.push(Violation::PiOutsideOpenInterval { pi });
        }
        for ((r, c), &v) in self.features.indexed_iter() {
            if !v.is_finite() {
                out.push(Violation::NonFiniteFeature { row: r, col: c });
            }
        }
        out
    }
}

/// One arm of a treatment split. Original sample indices travel with the
/// subset so downstream bookkeeping (cross-fitting folds, nuisance
/// lookups) stays traceable.
#[derive(Debug, Clone)]
pub struct ArmSubset {
    /// Indices into the parent dataset, ascending.
    pub indices: Vec<usize>,
    /// Outcomes of the subset, parallel to `indices`.
    pub outcomes: Vec<u8>,
}

impl ArmSubset {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Gather the subset's entries from a full-length vector.
    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&i| full[i]).collect()
    }
}

/// Exhaustive, disjoint partition of a dataset by treatment flag.
#[derive(Debug, Clone)]
pub struct TreatmentSplit {
    pub control: ArmSubset,
    pub treated: ArmSubset,
}

/// Partition a dataset into control and treated subsets.
pub fn split_by_treatment(dataset: &RctDataset) -> TreatmentSplit {
    let mut control = ArmSubset { indices: Vec::new(), outcomes: Vec::new() };
    let mut treated = ArmSubset { indices: Vec::new(), outcomes: Vec::new() };
    for (i, (&t, &y)) in dataset.treatment.iter().zip(&dataset.outcome).enumerate() {
        if t == 1 {
            treated.indices.push(i);
            treated.outcomes.push(y);
        } else {
            control.indices.push(i);
            control.outcomes.push(y);
        }
    }
    TreatmentSplit { control, treated }
}

/// A named model's scores over a dataset (or pool), one real per sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreSet {
    pub model_name: String,
    pub scores: Vec<f64>,
}

impl ScoreSet {
    pub fn new(model_name: impl Into<String>, scores: Vec<f64>) -> Result<Self> {
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(EvalError::NonFinite("model scores"));
        }
        Ok(Self { model_name: model_name.into(), scores })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Whether nuisance vectors cover every sample of a dataset or only its
/// treated subset (in dataset order).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NuisanceScope {
    FullSample,
    TreatedOnly,
}

/// Per-sample nuisance estimates plus population-level aggregates.
///
/// `omega_hat[i]` estimates P(Y=1 | X=x_i, T=0) and is clamped into
/// `[eps, 1-eps]`; `tau_hat[i]` estimates the conditional average
/// treatment effect at x_i and may be negative. The stored aggregates
/// reflect how the producer summarized its vectors; the treated-arm
/// estimators recompute their own plug-ins from the data they see.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NuisanceEstimates {
    pub omega_hat: Vec<f64>,
    pub tau_hat: Vec<f64>,
    pub mu1_hat: f64,
    pub mu0_hat: f64,
    pub tau_bar_hat: f64,
    pub scope: NuisanceScope,
}

impl NuisanceEstimates {
    /// Build from per-sample vectors, clamping omega and summarizing
    /// aggregates from vector means (mu0 = mean omega, tau_bar = mean tau,
    /// mu1 = mu0 + tau_bar, all probabilities clamped).
    pub fn from_vectors(omega_hat: Vec<f64>, tau_hat: Vec<f64>, scope: NuisanceScope) -> Result<Self> {
        if omega_hat.len() != tau_hat.len() {
            return Err(EvalError::LengthMismatch {
                left: omega_hat.len(),
                right: tau_hat.len(),
                context: "omega_hat vs tau_hat",
            });
        }
        if omega_hat.iter().chain(tau_hat.iter()).any(|v| !v.is_finite()) {
            return Err(EvalError::NonFinite("nuisance estimates"));
        }
        let omega_hat: Vec<f64> = omega_hat.into_iter().map(clamp_prob).collect();
        let n = omega_hat.len().max(1) as f64;
        let mu0_hat = clamp_prob(omega_hat.iter().sum::<f64>() / n);
        let tau_bar = tau_hat.iter().sum::<f64>() / n;
        let mu1_hat = clamp_prob(mu0_hat + tau_bar);
        Ok(Self {
            omega_hat,
            tau_hat,
            mu1_hat,
            mu0_hat,
            tau_bar_hat: mu1_hat - mu0_hat,
            scope,
        })
    }

    /// Nuisance values for the treated subset, in treated-subset order.
    pub fn treated_values(&self, split: &TreatmentSplit) -> Result<(Vec<f64>, Vec<f64>)> {
        match self.scope {
            NuisanceScope::FullSample => {
                let need = split.control.len() + split.treated.len();
                if self.omega_hat.len() != need {
                    return Err(EvalError::LengthMismatch {
                        left: self.omega_hat.len(),
                        right: need,
                        context: "full-sample nuisance vs dataset size",
                    });
                }
                Ok((
                    split.treated.gather(&self.omega_hat),
                    split.treated.gather(&self.tau_hat),
                ))
            }
            NuisanceScope::TreatedOnly => {
                if self.omega_hat.len() != split.treated.len() {
                    return Err(EvalError::LengthMismatch {
                        left: self.omega_hat.len(),
                        right: split.treated.len(),
                        context: "treated-only nuisance vs treated size",
                    });
                }
                Ok((self.omega_hat.clone(), self.tau_hat.clone()))
            }
        }
    }
}

/// Estimation method tags, as exposed on the CLI and in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Standard,
    Naive,
    AllData,
    Npw,
    NpwOmegaOnly,
    NpwTauOnly,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Standard,
        Method::Naive,
        Method::AllData,
        Method::Npw,
        Method::NpwOmegaOnly,
        Method::NpwTauOnly,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Standard => "standard",
            Method::Naive => "naive",
            Method::AllData => "all_data",
            Method::Npw => "npw",
            Method::NpwOmegaOnly => "npw_omega_only",
            Method::NpwTauOnly => "npw_tau_only",
        }
    }

    /// True when the method consumes nuisance estimates.
    pub fn needs_nuisance(&self) -> bool {
        matches!(self, Method::Npw | Method::NpwOmegaOnly | Method::NpwTauOnly)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Method::Standard),
            "naive" => Ok(Method::Naive),
            "all_data" => Ok(Method::AllData),
            "npw" => Ok(Method::Npw),
            "npw_omega_only" => Ok(Method::NpwOmegaOnly),
            "npw_tau_only" => Ok(Method::NpwTauOnly),
            other => Err(EvalError::InvalidInput(format!("unknown method `{other}`"))),
        }
    }
}

/// One estimator's output: the value plus enough context to audit it.
/// The tau-path value may fall outside [0,1]; it is reported raw unless
/// clipping was requested.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AucEstimate {
    pub method: Method,
    pub value: f64,
    pub n_control: usize,
    pub n_treated: usize,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub diagnostics: BTreeMap<String, f64>,
}

impl AucEstimate {
    pub fn new(method: Method, value: f64, n_control: usize, n_treated: usize) -> Self {
        Self { method, value, n_control, n_treated, diagnostics: BTreeMap::new() }
    }

    pub fn with_diag(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }
}

/// Bias-theory diagnostics for the naive augmented estimator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiasDiagnostics {
    /// Multiplier on delta(f); always < 1 for valid population parameters.
    pub alpha: f64,
    /// Multiplier on sigma(f); always > 0.
    pub beta: f64,
    /// True AUROC minus 0.5.
    pub delta_f: f64,
    /// Covariance between the CATE and the score CDF.
    pub sigma_f: f64,
    /// alpha * delta_f - beta * sigma_f: the expected shortfall of the
    /// naive estimate below the true AUROC (truth minus expected estimate).
    pub predicted_bias: f64,
}

impl BiasDiagnostics {
    pub fn new(alpha: f64, beta: f64, delta_f: f64, sigma_f: f64) -> Self {
        Self { alpha, beta, delta_f, sigma_f, predicted_bias: alpha * delta_f - beta * sigma_f }
    }
}
