//! Nuisance-parameter estimation: a built-in L2-regularized logistic
//! learner, k-fold cross-fitting that produces out-of-fold omega and tau
//! estimates (T-learner), and a noisy-oracle mode for synthetic runs.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{clamp_prob, split_by_treatment, NuisanceEstimates, NuisanceScope, RctDataset};
use crate::error::{Arm, EvalError, Result};

/// Gradient-descent settings for the logistic learner.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub l2_penalty: f64,
    pub max_iterations: usize,
    pub step_size: f64,
    pub convergence_tol: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self { l2_penalty: 1.0, max_iterations: 500, step_size: 0.1, convergence_tol: 1e-7 }
    }
}

/// Fitted affine scorer on (already standardized) features.
#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub weights: Array1<f64>,
    pub intercept: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// L2-regularized mean negative log-likelihood:
/// (1/n) sum NLL_i + l2/(2n) * ||w||^2 (intercept unpenalized).
pub fn logistic_loss(
    features: ArrayView2<f64>,
    labels: &[u8],
    weights: ArrayView1<f64>,
    intercept: f64,
    l2_penalty: f64,
) -> f64 {
    let n = labels.len() as f64;
    let z = features.dot(&weights) + intercept;
    let mut loss = 0.0;
    for (&y, &zi) in labels.iter().zip(z.iter()) {
        // log(1 + exp(z)) - y*z, computed stably.
        let log1pexp = if zi > 0.0 { zi + (-zi).exp().ln_1p() } else { zi.exp().ln_1p() };
        loss += log1pexp - y as f64 * zi;
    }
    loss / n + l2_penalty / (2.0 * n) * weights.dot(&weights)
}

/// Fit by full-batch gradient descent. Single-class input returns zero
/// weights and an intercept at the logit of the clamped class rate.
pub fn fit_logistic(
    features: ArrayView2<f64>,
    labels: &[u8],
    config: &LearnerConfig,
) -> Result<LogisticFit> {
    let n = labels.len();
    if n == 0 {
        return Err(EvalError::InvalidInput("fit_logistic needs at least one sample".into()));
    }
    if features.nrows() != n {
        return Err(EvalError::LengthMismatch {
            left: features.nrows(),
            right: n,
            context: "feature rows vs labels",
        });
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite("features"));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(EvalError::InvalidInput("labels must be 0 or 1".into()));
    }
    let p = features.ncols();
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == n {
        let rate = clamp_prob(positives as f64 / n as f64);
        return Ok(LogisticFit {
            weights: Array1::zeros(p),
            intercept: (rate / (1.0 - rate)).ln(),
            converged: true,
            iterations: 0,
        });
    }

    let y: Array1<f64> = labels.iter().map(|&v| v as f64).collect();
    let nf = n as f64;
    let mut w: Array1<f64> = Array1::zeros(p);
    let mut b = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..config.max_iterations {
        iterations = it + 1;
        let z = features.dot(&w) + b;
        let resid: Array1<f64> = z.mapv(sigmoid) - &y;
        let grad_w = features.t().dot(&resid) / nf + &w * (config.l2_penalty / nf);
        let grad_b = resid.sum() / nf;
        let grad_norm = (grad_w.dot(&grad_w) + grad_b * grad_b).sqrt();
        if grad_norm < config.convergence_tol {
            converged = true;
            break;
        }
        w = w - &grad_w * config.step_size;
        b -= config.step_size * grad_b;
    }
    Ok(LogisticFit { weights: w, intercept: b, converged, iterations })
}

/// Clamped sigmoid of the affine score for each row.
pub fn predict_proba(
    weights: ArrayView1<f64>,
    intercept: f64,
    features: ArrayView2<f64>,
) -> Result<Vec<f64>> {
    if features.ncols() != weights.len() {
        return Err(EvalError::LengthMismatch {
            left: features.ncols(),
            right: weights.len(),
            context: "feature columns vs weights",
        });
    }
    let z = features.dot(&weights) + intercept;
    Ok(z.iter().map(|&zi| clamp_prob(sigmoid(zi))).collect())
}

/// Per-column standardization parameters estimated from a training set.
#[derive(Debug, Clone)]
pub struct Standardizer {
    pub means: Array1<f64>,
    pub scales: Array1<f64>,
}

impl Standardizer {
    pub fn fit(features: ArrayView2<f64>) -> Self {
        let n = features.nrows().max(1) as f64;
        let means = features.sum_axis(Axis(0)) / n;
        let mut scales = Array1::zeros(features.ncols());
        for (c, mut_sc) in scales.iter_mut().enumerate() {
            let col = features.column(c);
            let var = col.iter().map(|v| (v - means[c]).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            *mut_sc = if sd > 0.0 { sd } else { 1.0 };
        }
        Self { means, scales }
    }

    pub fn apply(&self, features: ArrayView2<f64>) -> Array2<f64> {
        let mut out = features.to_owned();
        for mut row in out.rows_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = (*v - self.means[c]) / self.scales[c];
            }
        }
        out
    }
}

/// Logistic model with its standardization transform: features are
/// standardized on the training set (fixed step size needs unit-scale
/// columns) and the same transform is applied at prediction time.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    pub standardizer: Standardizer,
    pub fit: LogisticFit,
}

impl LogisticModel {
    pub fn fit(features: ArrayView2<f64>, labels: &[u8], config: &LearnerConfig) -> Result<Self> {
        let standardizer = Standardizer::fit(features);
        let standardized = standardizer.apply(features);
        let fit = fit_logistic(standardized.view(), labels, config)?;
        Ok(Self { standardizer, fit })
    }

    pub fn predict_proba(&self, features: ArrayView2<f64>) -> Result<Vec<f64>> {
        let standardized = self.standardizer.apply(features);
        predict_proba(self.fit.weights.view(), self.fit.intercept, standardized.view())
    }

    /// Raw affine scores (monotone in predicted probability).
    pub fn decision_scores(&self, features: ArrayView2<f64>) -> Result<Vec<f64>> {
        if features.ncols() != self.fit.weights.len() {
            return Err(EvalError::LengthMismatch {
                left: features.ncols(),
                right: self.fit.weights.len(),
                context: "feature columns vs weights",
            });
        }
        let standardized = self.standardizer.apply(features);
        let z = standardized.dot(&self.fit.weights) + self.fit.intercept;
        Ok(z.to_vec())
    }
}

/// Cross-fitting settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossFitConfig {
    pub folds: usize,
    pub learner: LearnerConfig,
    pub seed: u64,
}

impl Default for CrossFitConfig {
    fn default() -> Self {
        Self { folds: 5, learner: LearnerConfig::default(), seed: 0 }
    }
}

/// Cross-fitting output: the nuisance estimates plus the fold bookkeeping
/// needed to assert the out-of-fold property.
#[derive(Debug, Clone)]
pub struct CrossFitOutput {
    pub nuisance: NuisanceEstimates,
    /// Fold id per sample; the model that scored sample i was trained on
    /// samples whose fold id differs from `fold_assignment[i]`.
    pub fold_assignment: Vec<usize>,
}

impl CrossFitOutput {
    /// True when no sample was scored by a model trained on it.
    pub fn out_of_fold_holds(&self) -> bool {
        let k = self.fold_assignment.iter().copied().max().map_or(0, |m| m + 1);
        self.fold_assignment.iter().enumerate().all(|(i, &f)| {
            let training: Vec<usize> = self
                .fold_assignment
                .iter()
                .enumerate()
                .filter(|(_, &g)| g != f)
                .map(|(j, _)| j)
                .collect();
            f < k && !training.contains(&i)
        })
    }
}

fn subset_rows(features: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((rows.len(), features.ncols()));
    for (r, &i) in rows.iter().enumerate() {
        out.row_mut(r).assign(&features.row(i));
    }
    out
}

/// K-fold cross-fitted nuisance estimation (T-learner).
///
/// For each fold, an outcome model for the control arm (omega) and one
/// for the treated arm (mu1) are fit on the other k-1 folds; every
/// sample's omega_hat and mu1_hat come from models that never saw it,
/// and tau_hat = mu1_hat - omega_hat. Aggregates follow the treated-arm
/// plug-in rule: mu1 from observed treated outcomes, tau_bar from tau_hat
/// over treated samples, mu0 = mu1 - tau_bar clamped.
pub fn cross_fit_nuisance(dataset: &RctDataset, config: &CrossFitConfig) -> Result<CrossFitOutput> {
    let n = dataset.len();
    if config.folds < 2 {
        return Err(EvalError::InvalidInput("cross-fitting needs at least 2 folds".into()));
    }
    if n < config.folds {
        return Err(EvalError::InvalidInput(format!(
            "cannot split {n} samples into {} folds",
            config.folds
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
    order.shuffle(&mut rng);
    let mut fold_assignment = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_assignment[i] = pos % config.folds;
    }
    cross_fit_with_folds(dataset, fold_assignment, &config.learner)
}

/// Cross-fitting with a caller-supplied fold assignment (one fold id per
/// sample). `cross_fit_nuisance` derives its assignment from a seeded
/// shuffle and delegates here.
pub fn cross_fit_with_folds(
    dataset: &RctDataset,
    fold_assignment: Vec<usize>,
    learner: &LearnerConfig,
) -> Result<CrossFitOutput> {
    let n = dataset.len();
    if fold_assignment.len() != n {
        return Err(EvalError::LengthMismatch {
            left: fold_assignment.len(),
            right: n,
            context: "fold assignment vs dataset size",
        });
    }
    let folds = fold_assignment.iter().copied().max().map_or(0, |m| m + 1);
    if folds < 2 {
        return Err(EvalError::InvalidInput("cross-fitting needs at least 2 folds".into()));
    }

    let mut omega_hat = vec![0.0; n];
    let mut mu1_vec = vec![0.0; n];
    for fold in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_assignment[i] != fold).collect();
        let holdout: Vec<usize> = (0..n).filter(|&i| fold_assignment[i] == fold).collect();
        let train_control: Vec<usize> =
            train.iter().copied().filter(|&i| dataset.treatment[i] == 0).collect();
        let train_treated: Vec<usize> =
            train.iter().copied().filter(|&i| dataset.treatment[i] == 1).collect();
        if train_control.is_empty() {
            return Err(EvalError::InsufficientArmData { fold, arm: Arm::Control });
        }
        if train_treated.is_empty() {
            return Err(EvalError::InsufficientArmData { fold, arm: Arm::Treated });
        }

        let holdout_x = subset_rows(&dataset.features, &holdout);
        for (arm_rows, out) in [(&train_control, &mut omega_hat), (&train_treated, &mut mu1_vec)] {
            let x = subset_rows(&dataset.features, arm_rows);
            let y: Vec<u8> = arm_rows.iter().map(|&i| dataset.outcome[i]).collect();
            let model = LogisticModel::fit(x.view(), &y, learner)?;
            let preds = model.predict_proba(holdout_x.view())?;
            for (&i, p) in holdout.iter().zip(preds) {
                out[i] = p;
            }
        }
    }

    let tau_hat: Vec<f64> = mu1_vec.iter().zip(&omega_hat).map(|(m1, om)| m1 - om).collect();

    let split = split_by_treatment(dataset);
    if split.treated.is_empty() {
        return Err(EvalError::EmptyArm(Arm::Treated));
    }
    let mu1_hat = split.treated.outcomes.iter().map(|&y| y as f64).sum::<f64>()
        / split.treated.len() as f64;
    let tau_bar = split.treated.gather(&tau_hat).iter().sum::<f64>() / split.treated.len() as f64;
    let mu0_hat = clamp_prob(mu1_hat - tau_bar);

    let mut nuisance =
        NuisanceEstimates::from_vectors(omega_hat, tau_hat, NuisanceScope::FullSample)?;
    nuisance.mu1_hat = clamp_prob(mu1_hat);
    nuisance.mu0_hat = mu0_hat;
    nuisance.tau_bar_hat = nuisance.mu1_hat - mu0_hat;

    Ok(CrossFitOutput { nuisance, fold_assignment })
}

/// Oracle nuisances perturbed by Gaussian noise of the given variance:
/// omega_hat = clip(omega + N(0, v)), tau_hat = tau + N(0, v) (unclipped,
/// CATE values can be negative).
pub fn noisy_oracle<R: Rng + ?Sized>(
    pool_omega: &[f64],
    pool_tau: &[f64],
    variance: f64,
    rng: &mut R,
) -> Result<NuisanceEstimates> {
    if pool_omega.len() != pool_tau.len() {
        return Err(EvalError::LengthMismatch {
            left: pool_omega.len(),
            right: pool_tau.len(),
            context: "pool omega vs pool tau",
        });
    }
    if variance < 0.0 || !variance.is_finite() {
        return Err(EvalError::InvalidInput(format!("noise variance {variance} invalid")));
    }
    let sd = variance.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let omega: Vec<f64> =
        pool_omega.iter().map(|&o| clamp_prob(o + sd * normal.sample(rng))).collect();
    let tau: Vec<f64> = pool_tau.iter().map(|&t| t + sd * normal.sample(rng)).collect();
    NuisanceEstimates::from_vectors(omega, tau, NuisanceScope::FullSample)
}
