//! Synthetic data-generating process: a large cohort with both potential
//! outcomes and known nuisance functions, ground-truth AUROC, a spectrum
//! of models of varying quality, and trial-sized subsampling.

use ndarray::Array2;
use rand::seq::index::sample as index_sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{RctDataset, ScoreSet};
use crate::error::{EvalError, Result};
use crate::metrics::{auc, TiePolicy};
use crate::nuisance::{LearnerConfig, LogisticModel};

/// Form of the per-sample effect numerator. `Linear` multiplies the
/// sigmoid gate by (1 - w_y . x); `SigmoidComplement` uses
/// (1 - sigmoid(w_y . x)) instead, which keeps the raw effect bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TauForm {
    #[default]
    Linear,
    SigmoidComplement,
}

/// Synthetic cohort settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DgpConfig {
    pub dim: usize,
    pub pool_size: usize,
    /// Average treatment effect the effect field is normalized to.
    pub delta: f64,
    pub pi: f64,
    /// Fraction of outcome-weight entries that are nonzero.
    pub w_y_density: f64,
    /// Support of the effect-gate weight entries.
    pub w_tau_values: Vec<f64>,
    /// Sampling probabilities over `w_tau_values`; must sum to 1.
    pub w_tau_probs: Vec<f64>,
    /// Probability clamp for Bernoulli parameters.
    pub prob_clip: f64,
    pub seed: u64,
    pub tau_form: TauForm,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            dim: 20,
            pool_size: 100_000,
            delta: 0.2,
            pi: 0.5,
            w_y_density: 0.4,
            w_tau_values: vec![0.0, 0.1, 0.2, 0.3, 0.4],
            w_tau_probs: vec![0.8, 0.05, 0.05, 0.05, 0.05],
            prob_clip: crate::data::PROB_EPSILON,
            seed: 0,
            tau_form: TauForm::Linear,
        }
    }
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.pool_size == 0 {
            return Err(EvalError::InvalidInput("dim and pool_size must be positive".into()));
        }
        if !(-1.0..=1.0).contains(&self.delta) {
            return Err(EvalError::InvalidInput(format!("delta {} outside [-1,1]", self.delta)));
        }
        if !(0.0..=1.0).contains(&self.pi) {
            return Err(EvalError::InvalidInput(format!("pi {} outside [0,1]", self.pi)));
        }
        if !(0.0..=1.0).contains(&self.w_y_density) {
            return Err(EvalError::InvalidInput(format!(
                "w_y_density {} outside [0,1]",
                self.w_y_density
            )));
        }
        if self.w_tau_values.len() != self.w_tau_probs.len() || self.w_tau_values.is_empty() {
            return Err(EvalError::InvalidInput("w_tau support/probability size mismatch".into()));
        }
        let total: f64 = self.w_tau_probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 || self.w_tau_probs.iter().any(|&p| p < 0.0) {
            return Err(EvalError::InvalidInput(format!(
                "w_tau probabilities sum to {total}, expected 1"
            )));
        }
        if !(self.prob_clip > 0.0 && self.prob_clip < 0.5) {
            return Err(EvalError::InvalidInput(format!(
                "prob_clip {} outside (0, 0.5)",
                self.prob_clip
            )));
        }
        Ok(())
    }
}

/// Generated cohort with potential outcomes and true nuisance values.
#[derive(Debug, Clone)]
pub struct SyntheticPool {
    pub features: Array2<f64>,
    /// Clamped baseline outcome probability sigmoid(w_y . x): the
    /// Bernoulli parameter behind y0.
    pub omega_true: Vec<f64>,
    /// Normalized effect field; its mean equals delta exactly before any
    /// clamping enters through `treated_prob_true`.
    pub tau_true: Vec<f64>,
    /// Clamped treated-arm probability clip(sigmoid(w_y . x) + tau): the
    /// Bernoulli parameter behind y1.
    pub treated_prob_true: Vec<f64>,
    /// Potential outcome without intervention.
    pub y0: Vec<u8>,
    /// Potential outcome with intervention.
    pub y1: Vec<u8>,
    pub w_y: Vec<f64>,
    pub w_tau: Vec<f64>,
    /// Fraction of samples whose treated-arm probability hit a clamp
    /// bound.
    pub clipped_fraction: f64,
    pub config: DgpConfig,
}

impl SyntheticPool {
    pub fn len(&self) -> usize {
        self.y0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y0.is_empty()
    }

    /// Effective conditional effect after clamping: the difference of the
    /// two realized Bernoulli parameters.
    pub fn effective_tau(&self) -> Vec<f64> {
        self.treated_prob_true
            .iter()
            .zip(&self.omega_true)
            .map(|(p1, p0)| p1 - p0)
            .collect()
    }

    /// Realized effect per sample, y1 - y0, as a float vector.
    pub fn realized_tau(&self) -> Vec<f64> {
        self.y1.iter().zip(&self.y0).map(|(&a, &b)| a as f64 - b as f64).collect()
    }

    /// y0 as a float vector (realized control-arm nuisance).
    pub fn realized_omega(&self) -> Vec<f64> {
        self.y0.iter().map(|&v| v as f64).collect()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Draw the outcome and effect weight vectors. `w_y` has exactly
/// round(density * dim) nonzero standard-normal entries at uniformly
/// chosen positions; `w_tau` entries are drawn independently from the
/// configured support.
pub fn gen_weights<R: Rng + ?Sized>(config: &DgpConfig, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let nonzero = (config.w_y_density * config.dim as f64).round() as usize;
    let mut positions: Vec<usize> = (0..config.dim).collect();
    positions.shuffle(rng);
    let mut w_y = vec![0.0; config.dim];
    for &p in positions.iter().take(nonzero) {
        w_y[p] = StandardNormal.sample(rng);
    }
    let mut w_tau = vec![0.0; config.dim];
    for w in w_tau.iter_mut() {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = *config.w_tau_values.last().unwrap();
        for (&v, &p) in config.w_tau_values.iter().zip(&config.w_tau_probs) {
            acc += p;
            if u < acc {
                chosen = v;
                break;
            }
        }
        *w = chosen;
    }
    (w_y, w_tau)
}

/// Generate the full cohort: Gaussian covariates, baseline probability
/// sigmoid(w_y . x), effect field normalized so its mean equals delta,
/// and independent potential-outcome draws with clamped Bernoulli
/// parameters.
pub fn gen_pool<R: Rng + ?Sized>(config: &DgpConfig, rng: &mut R) -> Result<SyntheticPool> {
    config.validate()?;
    let n = config.pool_size;
    let p = config.dim;
    let (w_y, w_tau) = gen_weights(config, rng);

    let mut features = Array2::zeros((n, p));
    for mut row in features.rows_mut() {
        for v in row.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
    }

    let mut gate = Vec::with_capacity(n);
    let mut omega_raw = Vec::with_capacity(n);
    for row in features.rows() {
        let zy: f64 = row.iter().zip(&w_y).map(|(x, w)| x * w).sum();
        let zt: f64 = row.iter().zip(&w_tau).map(|(x, w)| x * w).sum();
        let factor = match config.tau_form {
            TauForm::Linear => 1.0 - zy,
            TauForm::SigmoidComplement => 1.0 - sigmoid(zy),
        };
        gate.push(sigmoid(zt) * factor);
        omega_raw.push(sigmoid(zy));
    }
    let normalizer = gate.iter().sum::<f64>() / n as f64;
    if normalizer.abs() < 1e-9 {
        return Err(EvalError::DegenerateTauNormalizer);
    }
    let tau_true: Vec<f64> = gate.iter().map(|&g| g * config.delta / normalizer).collect();

    let clip = |v: f64| v.clamp(config.prob_clip, 1.0 - config.prob_clip);
    let omega_true: Vec<f64> = omega_raw.iter().map(|&o| clip(o)).collect();
    let mut clipped = 0usize;
    let treated_prob_true: Vec<f64> = omega_raw
        .iter()
        .zip(&tau_true)
        .map(|(&o, &t)| {
            let raw = o + t;
            let c = clip(raw);
            if c != raw {
                clipped += 1;
            }
            c
        })
        .collect();

    let mut y0 = Vec::with_capacity(n);
    let mut y1 = Vec::with_capacity(n);
    for i in 0..n {
        y0.push(u8::from(rng.gen::<f64>() < omega_true[i]));
        y1.push(u8::from(rng.gen::<f64>() < treated_prob_true[i]));
    }

    Ok(SyntheticPool {
        features,
        omega_true,
        tau_true,
        treated_prob_true,
        y0,
        y1,
        w_y,
        w_tau,
        clipped_fraction: clipped as f64 / n as f64,
        config: config.clone(),
    })
}

/// Ground-truth AUROC of a score vector: AUROC over the whole pool with
/// the no-intervention potential outcome as labels. (Scoring the whole
/// pool rather than a randomized control half has the same expectation
/// and lower variance; see `true_auc_control_half` for the subsampled
/// convention.)
pub fn true_auc(pool: &SyntheticPool, scores: &[f64], tie: TiePolicy) -> Result<f64> {
    if scores.len() != pool.len() {
        return Err(EvalError::LengthMismatch {
            left: scores.len(),
            right: pool.len(),
            context: "scores vs pool size",
        });
    }
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (&s, &y) in scores.iter().zip(&pool.y0) {
        if y == 1 {
            pos.push(s);
        } else {
            neg.push(s);
        }
    }
    auc(&pos, &neg, tie)
}

/// Ground truth computed the subsampled way: assign a Bernoulli(pi)
/// treatment flag to every pool sample and compute AUROC on the control
/// half only.
pub fn true_auc_control_half<R: Rng + ?Sized>(
    pool: &SyntheticPool,
    scores: &[f64],
    pi: f64,
    tie: TiePolicy,
    rng: &mut R,
) -> Result<f64> {
    if scores.len() != pool.len() {
        return Err(EvalError::LengthMismatch {
            left: scores.len(),
            right: pool.len(),
            context: "scores vs pool size",
        });
    }
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (&s, &y) in scores.iter().zip(&pool.y0) {
        if rng.gen::<f64>() < pi {
            continue;
        }
        if y == 1 {
            pos.push(s);
        } else {
            neg.push(s);
        }
    }
    auc(&pos, &neg, tie)
}

/// A trial-sized draw from the pool, with the pool indices retained so
/// oracle nuisances and pool-wide scores can be looked up per sample.
#[derive(Debug, Clone)]
pub struct RctDraw {
    pub dataset: RctDataset,
    pub pool_indices: Vec<usize>,
}

impl RctDraw {
    /// Subset a pool-length vector to the drawn samples, in draw order.
    pub fn gather(&self, pool_values: &[f64]) -> Vec<f64> {
        self.pool_indices.iter().map(|&i| pool_values[i]).collect()
    }
}

/// Draw n pool samples without replacement, assign Bernoulli(pi)
/// treatment, and observe the matching potential outcome.
pub fn subsample_rct<R: Rng + ?Sized>(
    pool: &SyntheticPool,
    n: usize,
    pi: f64,
    rng: &mut R,
) -> Result<RctDraw> {
    if n > pool.len() {
        return Err(EvalError::InvalidInput(format!(
            "cannot draw {n} samples from a pool of {}",
            pool.len()
        )));
    }
    if !(0.0..=1.0).contains(&pi) {
        return Err(EvalError::InvalidInput(format!("pi {pi} outside [0,1]")));
    }
    let indices: Vec<usize> = index_sample(rng, pool.len(), n).into_vec();
    let mut features = Array2::zeros((n, pool.features.ncols()));
    let mut outcome = Vec::with_capacity(n);
    let mut treatment = Vec::with_capacity(n);
    for (r, &i) in indices.iter().enumerate() {
        features.row_mut(r).assign(&pool.features.row(i));
        let t = u8::from(rng.gen::<f64>() < pi);
        treatment.push(t);
        outcome.push(if t == 1 { pool.y1[i] } else { pool.y0[i] });
    }
    Ok(RctDraw {
        dataset: RctDataset::new(features, outcome, treatment, pi)?,
        pool_indices: indices,
    })
}

/// One model of the generated spectrum: pool-wide scores plus its
/// ground-truth AUROC.
#[derive(Debug, Clone)]
pub struct SpectrumModel {
    pub score_set: ScoreSet,
    pub true_auc: f64,
    pub training_size: usize,
    pub converged: bool,
}

/// Fit one logistic scorer per training size on fresh control-labeled
/// subsamples and score the entire pool. Models come back sorted by true
/// AUROC ascending; exact true-AUROC ties are broken by re-drawing the
/// later model's training set.
pub fn gen_model_spectrum<R: Rng + ?Sized>(
    pool: &SyntheticPool,
    training_sizes: &[usize],
    learner: &LearnerConfig,
    tie: TiePolicy,
    rng: &mut R,
) -> Result<Vec<SpectrumModel>> {
    let mut models: Vec<SpectrumModel> = Vec::with_capacity(training_sizes.len());
    for (k, &size) in training_sizes.iter().enumerate() {
        if size > pool.len() {
            return Err(EvalError::InvalidInput(format!(
                "training size {size} exceeds pool size {}",
                pool.len()
            )));
        }
        const MAX_REDRAWS: usize = 5;
        let mut accepted = None;
        for _attempt in 0..MAX_REDRAWS {
            let train: Vec<usize> = index_sample(rng, pool.len(), size).into_vec();
            let mut x = Array2::zeros((size, pool.features.ncols()));
            let mut y = Vec::with_capacity(size);
            for (r, &i) in train.iter().enumerate() {
                x.row_mut(r).assign(&pool.features.row(i));
                y.push(pool.y0[i]);
            }
            let model = LogisticModel::fit(x.view(), &y, learner)?;
            let scores = model.decision_scores(pool.features.view())?;
            let value = true_auc(pool, &scores, tie)?;
            if models.iter().all(|m| m.true_auc != value) {
                accepted = Some(SpectrumModel {
                    score_set: ScoreSet::new(format!("m{:02}_n{}", k, size), scores)?,
                    true_auc: value,
                    training_size: size,
                    converged: model.fit.converged || model.fit.iterations == 0,
                });
                break;
            }
        }
        match accepted {
            Some(m) => models.push(m),
            None => {
                return Err(EvalError::InvalidInput(format!(
                    "could not break true-AUROC tie for training size {size}"
                )))
            }
        }
    }
    models.sort_by(|a, b| a.true_auc.total_cmp(&b.true_auc));
    Ok(models)
}

/// Deterministic pool construction from a config: seeds an RNG from
/// `config.seed` and retries a handful of times on a degenerate effect
/// normalizer.
pub fn build_pool(config: &DgpConfig) -> Result<SyntheticPool> {
    let mut last = None;
    for attempt in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(attempt * 0x9E37_79B9));
        match gen_pool(config, &mut rng) {
            Ok(pool) => return Ok(pool),
            Err(e @ EvalError::DegenerateTauNormalizer) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or(EvalError::DegenerateTauNormalizer))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(delta: f64, seed: u64) -> DgpConfig {
        DgpConfig { pool_size: 5_000, delta, seed, ..DgpConfig::default() }
    }

    #[test]
    fn weights_have_exact_density_and_support() {
        let cfg = DgpConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (w_y, w_tau) = gen_weights(&cfg, &mut rng);
        assert_eq!(w_y.iter().filter(|&&w| w != 0.0).count(), 8);
        for w in &w_tau {
            assert!(cfg.w_tau_values.contains(w), "unexpected w_tau entry {w}");
        }
    }

    #[test]
    fn weights_are_seed_deterministic() {
        let cfg = DgpConfig::default();
        let a = gen_weights(&cfg, &mut ChaCha8Rng::seed_from_u64(5));
        let b = gen_weights(&cfg, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn zero_delta_means_zero_effect() {
        let pool = build_pool(&small_config(0.0, 3)).unwrap();
        assert!(pool.tau_true.iter().all(|&t| t == 0.0));
        assert_eq!(pool.omega_true, pool.treated_prob_true);
    }

    #[test]
    fn effect_mean_equals_delta_exactly() {
        for (delta, seed) in [(0.2, 1), (-0.4, 2), (0.05, 3)] {
            let pool = build_pool(&small_config(delta, seed)).unwrap();
            let mean = pool.tau_true.iter().sum::<f64>() / pool.len() as f64;
            assert!(
                (mean - delta).abs() < 1e-12,
                "delta {delta}: normalized mean {mean}"
            );
        }
    }

    #[test]
    fn arm_rates_track_delta_at_scale() {
        let cfg = DgpConfig { pool_size: 100_000, delta: 0.2, seed: 7, ..DgpConfig::default() };
        let pool = build_pool(&cfg).unwrap();
        let m0 = pool.y0.iter().map(|&v| v as f64).sum::<f64>() / pool.len() as f64;
        let m1 = pool.y1.iter().map(|&v| v as f64).sum::<f64>() / pool.len() as f64;
        // The realized outcome gap matches the mean of the clamped
        // Bernoulli parameters at pool scale. Clamping itself absorbs a
        // visible share of the nominal delta with the linear effect
        // factor, so the nominal 0.2 is checked against the parameter
        // means, not the raw delta.
        let target = pool.effective_tau().iter().sum::<f64>() / pool.len() as f64;
        assert!((m1 - m0 - target).abs() < 0.01, "realized ATE {} vs target {target}", m1 - m0);
        assert!(target > 0.1 && target <= 0.2, "clamped ATE target {target}");
        assert!(pool.clipped_fraction > 0.0);
    }

    #[test]
    fn bernoulli_parameters_are_clamped() {
        let pool = build_pool(&small_config(0.4, 11)).unwrap();
        let eps = pool.config.prob_clip;
        for (&p0, &p1) in pool.omega_true.iter().zip(&pool.treated_prob_true) {
            assert!((eps..=1.0 - eps).contains(&p0));
            assert!((eps..=1.0 - eps).contains(&p1));
        }
    }

    #[test]
    fn pool_generation_is_deterministic() {
        let cfg = small_config(0.2, 23);
        let a = build_pool(&cfg).unwrap();
        let b = build_pool(&cfg).unwrap();
        assert_eq!(a.features, b.features);
        assert_eq!(a.y0, b.y0);
        assert_eq!(a.y1, b.y1);
        assert_eq!(a.tau_true, b.tau_true);
    }

    #[test]
    fn true_auc_of_omega_beats_chance_and_reverses() {
        let pool = build_pool(&small_config(0.2, 31)).unwrap();
        let fwd = true_auc(&pool, &pool.omega_true, TiePolicy::Half).unwrap();
        assert!(fwd > 0.5, "omega-aligned scorer at {fwd}");
        let rev: Vec<f64> = pool.omega_true.iter().map(|v| -v).collect();
        let back = true_auc(&pool, &rev, TiePolicy::Half).unwrap();
        assert!((fwd + back - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_scores_sit_at_chance_on_big_pool() {
        let cfg = DgpConfig { pool_size: 100_000, delta: 0.2, seed: 13, ..DgpConfig::default() };
        let pool = build_pool(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let scores: Vec<f64> = (0..pool.len()).map(|_| rng.gen::<f64>()).collect();
        let v = true_auc(&pool, &scores, TiePolicy::Half).unwrap();
        assert!((v - 0.5).abs() < 0.005, "chance level {v}");
    }

    #[test]
    fn subsample_respects_pi_boundaries_and_determinism() {
        let pool = build_pool(&small_config(0.2, 41)).unwrap();
        let draw = subsample_rct(&pool, 100, 0.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        for (k, &i) in draw.pool_indices.iter().enumerate() {
            assert_eq!(draw.dataset.outcome[k], pool.y0[i]);
            assert_eq!(draw.dataset.treatment[k], 0);
        }
        let a = subsample_rct(&pool, 200, 0.5, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let b = subsample_rct(&pool, 200, 0.5, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(a.pool_indices, b.pool_indices);
        assert_eq!(a.dataset.treatment, b.dataset.treatment);
        assert!(subsample_rct(&pool, pool.len() + 1, 0.5, &mut ChaCha8Rng::seed_from_u64(3)).is_err());
    }

    #[test]
    fn subsampled_arm_sizes_concentrate() {
        let pool = build_pool(&small_config(0.2, 43)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut total = 0usize;
        let reps = 1000;
        for _ in 0..reps {
            let draw = subsample_rct(&pool, 200, 0.5, &mut rng).unwrap();
            total += draw.dataset.treatment.iter().filter(|&&t| t == 1).count();
        }
        let mean = total as f64 / reps as f64;
        assert!((mean - 100.0).abs() < 5.0, "mean treated arm size {mean}");
    }

    #[test]
    fn marginal_rates_converge_over_draws() {
        let pool = build_pool(&small_config(0.2, 47)).unwrap();
        let target0 = pool.omega_true.iter().sum::<f64>() / pool.len() as f64;
        let target1 = pool.treated_prob_true.iter().sum::<f64>() / pool.len() as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (mut y_c, mut n_c, mut y_t, mut n_t) = (0.0, 0u32, 0.0, 0u32);
        for _ in 0..500 {
            let draw = subsample_rct(&pool, 200, 0.5, &mut rng).unwrap();
            for (&y, &t) in draw.dataset.outcome.iter().zip(&draw.dataset.treatment) {
                if t == 1 {
                    y_t += y as f64;
                    n_t += 1;
                } else {
                    y_c += y as f64;
                    n_c += 1;
                }
            }
        }
        // Bernoulli draws and subsampling both add noise around the
        // clamped parameter means.
        assert!((y_c / n_c as f64 - target0).abs() < 0.02);
        assert!((y_t / n_t as f64 - target1).abs() < 0.02);
    }

    #[test]
    fn spectrum_sizes_and_distinct_true_aucs() {
        let cfg = DgpConfig { pool_size: 20_000, delta: 0.2, seed: 53, ..DgpConfig::default() };
        let pool = build_pool(&cfg).unwrap();
        let sizes = [20, 35, 60, 100, 180, 320, 560, 1000, 1300, 1500];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let models = gen_model_spectrum(
            &pool,
            &sizes,
            &LearnerConfig::default(),
            TiePolicy::Half,
            &mut rng,
        )
        .unwrap();
        assert_eq!(models.len(), sizes.len());
        for pair in models.windows(2) {
            assert!(pair[0].true_auc < pair[1].true_auc);
        }
    }

    #[test]
    fn degenerate_training_draw_scores_by_intercept() {
        // A pool whose y0 is almost surely 1 in any tiny draw.
        let cfg = DgpConfig { pool_size: 2_000, delta: 0.0, seed: 59, ..DgpConfig::default() };
        let mut pool = build_pool(&cfg).unwrap();
        pool.y0 = vec![1; pool.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let r = gen_model_spectrum(
            &pool,
            &[5],
            &LearnerConfig::default(),
            TiePolicy::Half,
            &mut rng,
        );
        // Single-class pools have no ground-truth AUROC at all.
        assert!(r.is_err());
        // With a couple of dissenting labels the fit itself is
        // single-class but the model is still produced and scored.
        pool.y0[0] = 0;
        pool.y0[1] = 0;
        let models = gen_model_spectrum(
            &pool,
            &[3],
            &LearnerConfig::default(),
            TiePolicy::Half,
            &mut ChaCha8Rng::seed_from_u64(11),
        )
        .unwrap();
        assert_eq!(models.len(), 1);
        assert!(models[0].converged);
    }

    #[test]
    fn learning_curve_median_is_non_decreasing() {
        let cfg = DgpConfig { pool_size: 20_000, delta: 0.2, seed: 61, ..DgpConfig::default() };
        let pool = build_pool(&cfg).unwrap();
        let sizes = [25, 100, 400, 1500];
        let mut per_size: Vec<Vec<f64>> = vec![Vec::new(); sizes.len()];
        for rep in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + rep);
            let models = gen_model_spectrum(
                &pool,
                &sizes,
                &LearnerConfig::default(),
                TiePolicy::Half,
                &mut rng,
            )
            .unwrap();
            // Models are sorted by true AUROC; recover by training size.
            for m in models {
                let k = sizes.iter().position(|&s| s == m.training_size).unwrap();
                per_size[k].push(m.true_auc);
            }
        }
        let medians: Vec<f64> = per_size
            .iter()
            .map(|v| {
                let mut s = v.clone();
                s.sort_by(f64::total_cmp);
                s[s.len() / 2]
            })
            .collect();
        for pair in medians.windows(2) {
            assert!(
                pair[1] >= pair[0] - 1e-9,
                "medians not non-decreasing: {medians:?}"
            );
        }
    }
}
