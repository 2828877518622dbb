//! Replicated Monte Carlo experiments: estimation-error sweeps over a
//! model spectrum, ranking-quality sweeps over treatment-effect settings,
//! bias verification against the theoretical prediction, and bootstrap
//! power analysis. Every experiment is a pure function of its config;
//! replicate r always derives its RNG from `base_seed + r`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Method, NuisanceEstimates, RctDataset, ScoreSet};
use crate::dgp::{
    build_pool, gen_model_spectrum, subsample_rct, true_auc, DgpConfig, RctDraw, SpectrumModel,
    SyntheticPool,
};
use crate::error::{EvalError, Result};
use crate::estimators::{estimate, NpwConfig};
use crate::metrics::{c_index, empirical_cdf, TiePolicy};
use crate::nuisance::{cross_fit_nuisance, noisy_oracle, CrossFitConfig, LearnerConfig};
use crate::theory::{bias_params, naive_bias, sigma_f, PopulationParams};

const SPECTRUM_SALT: u64 = 0x5350_4543;
const CI_SALT: u64 = 0x4349_0000;

/// Where per-sample nuisance estimates come from during a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuisanceMode {
    /// True pool nuisances perturbed by Gaussian noise of the grid
    /// variance.
    OracleNoisy,
    /// K-fold cross-fitted logistic estimates from the drawn trial
    /// itself.
    CrossFit,
}

/// Which pool values a noisy oracle perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleBasis {
    /// The Bernoulli parameters behind the potential outcomes.
    Probability,
    /// The realized potential outcomes themselves (y0, y1 - y0): the
    /// exact conditional oracle for a fixed pool.
    Realized,
}

/// Settings shared by the sweep-style experiments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub dgp: DgpConfig,
    /// Trial size drawn per replicate.
    pub n_rct: usize,
    pub replications: usize,
    /// Treatment-effect grid for the ranking sweep.
    pub ate_grid: Vec<f64>,
    /// Oracle noise variances.
    pub noise_grid: Vec<f64>,
    pub nuisance_mode: NuisanceMode,
    pub oracle_basis: OracleBasis,
    pub estimator_set: Vec<Method>,
    pub tie: TiePolicy,
    pub base_seed: u64,
    /// Training sizes for the generated model spectrum.
    pub spectrum_sizes: Vec<usize>,
    /// Folds for cross-fitted nuisances.
    pub folds: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            dgp: DgpConfig::default(),
            n_rct: 200,
            replications: 100,
            ate_grid: vec![0.1, 0.2, 0.3],
            noise_grid: vec![0.01],
            nuisance_mode: NuisanceMode::OracleNoisy,
            oracle_basis: OracleBasis::Probability,
            estimator_set: vec![Method::Standard, Method::Naive, Method::Npw],
            tie: TiePolicy::Strict,
            base_seed: 0,
            spectrum_sizes: vec![20, 35, 60, 100, 150, 240, 380, 600, 950, 1200, 1500],
            folds: 5,
        }
    }
}

impl SweepConfig {
    fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(EvalError::InvalidInput("replications must be >= 1".into()));
        }
        if self.noise_grid.is_empty() && self.nuisance_mode == NuisanceMode::OracleNoisy {
            return Err(EvalError::InvalidInput("noise grid is empty".into()));
        }
        if self.estimator_set.is_empty() {
            return Err(EvalError::InvalidInput("estimator set is empty".into()));
        }
        if self.n_rct > self.dgp.pool_size {
            return Err(EvalError::InvalidInput("n_rct exceeds pool size".into()));
        }
        Ok(())
    }

    fn npw_config(&self) -> NpwConfig {
        NpwConfig { tie: self.tie, ..NpwConfig::default() }
    }
}

/// Bootstrap settings for power analysis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerConfig {
    pub n_grid: Vec<usize>,
    pub bootstrap_samples: usize,
    pub repetitions: usize,
    pub significance: f64,
    pub base_seed: u64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            n_grid: vec![100, 200, 400, 800],
            bootstrap_samples: 1000,
            repetitions: 100,
            significance: 0.05,
            base_seed: 0,
        }
    }
}

impl PowerConfig {
    fn validate(&self) -> Result<()> {
        if self.bootstrap_samples < 100 {
            return Err(EvalError::InvalidInput("bootstrap_samples must be >= 100".into()));
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return Err(EvalError::InvalidInput("significance must be in (0,1)".into()));
        }
        if self.n_grid.is_empty() || self.repetitions == 0 {
            return Err(EvalError::InvalidInput("empty n grid or zero repetitions".into()));
        }
        Ok(())
    }
}

/// Percentile bootstrap confidence interval for the mean of `values`.
pub fn bootstrap_ci<R: Rng + ?Sized>(
    values: &[f64],
    level: f64,
    draws: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(EvalError::InvalidInput("bootstrap_ci needs at least one value".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(EvalError::InvalidInput(format!("level {level} outside (0,1)")));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if values.iter().all(|&v| v == values[0]) {
        return Ok((values[0], values[0]));
    }
    let mut means = Vec::with_capacity(draws);
    for _ in 0..draws {
        let mut acc = 0.0;
        for _ in 0..n {
            acc += values[rng.gen_range(0..n)];
        }
        means.push(acc / n as f64);
    }
    means.sort_by(f64::total_cmp);
    let q = |p: f64| -> f64 {
        let pos = p * (means.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        means[lo] * (1.0 - frac) + means[hi] * frac
    };
    let tail = (1.0 - level) / 2.0;
    let (lo, hi) = (q(tail), q(1.0 - tail));
    // The interval brackets the sample mean by construction except in
    // pathological resampling corners; enforce the reporting invariant.
    Ok((lo.min(mean), hi.max(mean)))
}

/// Aggregated statistics of one method within one experiment cell.
#[derive(Debug, Clone, Serialize)]
pub struct MethodAgg {
    pub method: Method,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub used: usize,
    pub skipped: usize,
    /// Per-replicate values behind the aggregate (not serialized into
    /// reports).
    #[serde(skip)]
    pub values: Vec<f64>,
}

/// One experiment setting (a model/noise or ATE/noise combination).
#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub setting: String,
    pub model_name: Option<String>,
    pub true_auc: Option<f64>,
    pub noise_variance: Option<f64>,
    pub ate: Option<f64>,
    pub methods: Vec<MethodAgg>,
}

/// A finished sweep: typed cells plus the resolved config snapshot.
#[derive(Debug, Clone, Serialize)]
pub struct SweepOutcome {
    pub metric: String,
    pub cells: Vec<SweepCell>,
    pub provenance: serde_json::Value,
}

/// Serializable long-format report: one row per setting with one summary
/// per method.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentReport {
    pub metric: String,
    pub provenance: serde_json::Value,
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportRow {
    pub setting: String,
    pub methods: Vec<MethodSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub used: usize,
    pub skipped: usize,
}

impl SweepOutcome {
    pub fn to_report(&self) -> ExperimentReport {
        ExperimentReport {
            metric: self.metric.clone(),
            provenance: self.provenance.clone(),
            rows: self
                .cells
                .iter()
                .map(|c| ReportRow {
                    setting: c.setting.clone(),
                    methods: c
                        .methods
                        .iter()
                        .map(|m| MethodSummary {
                            method: m.method.to_string(),
                            mean: m.mean,
                            ci_lo: m.ci_lo,
                            ci_hi: m.ci_hi,
                            used: m.used,
                            skipped: m.skipped,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

/// Per-replicate nuisance estimates for a drawn trial.
fn replicate_nuisance(
    cfg: &SweepConfig,
    pool_omega: &[f64],
    pool_tau: &[f64],
    draw: &RctDraw,
    variance: f64,
    rng: &mut ChaCha8Rng,
    replicate: usize,
) -> Result<NuisanceEstimates> {
    match cfg.nuisance_mode {
        NuisanceMode::OracleNoisy => {
            let omega = draw.gather(pool_omega);
            let tau = draw.gather(pool_tau);
            noisy_oracle(&omega, &tau, variance, rng)
        }
        NuisanceMode::CrossFit => {
            let cf = CrossFitConfig {
                folds: cfg.folds,
                learner: LearnerConfig::default(),
                seed: cfg.base_seed.wrapping_add(replicate as u64),
            };
            Ok(cross_fit_nuisance(&draw.dataset, &cf)?.nuisance)
        }
    }
}

fn oracle_vectors(pool: &SyntheticPool, basis: OracleBasis) -> (Vec<f64>, Vec<f64>) {
    match basis {
        OracleBasis::Probability => (pool.omega_true.clone(), pool.effective_tau()),
        OracleBasis::Realized => (pool.realized_omega(), pool.realized_tau()),
    }
}

fn aggregate(
    cfg_seed: u64,
    row_index: usize,
    method: Method,
    values: Vec<f64>,
    skipped: usize,
) -> Result<MethodAgg> {
    if values.is_empty() {
        // Row marked unavailable: mean NaN would poison reports, so keep
        // zeros and let used=0 flag it.
        return Ok(MethodAgg {
            method,
            mean: f64::NAN,
            ci_lo: f64::NAN,
            ci_hi: f64::NAN,
            used: 0,
            skipped,
            values,
        });
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg_seed ^ CI_SALT ^ (row_index as u64));
    let (ci_lo, ci_hi) = bootstrap_ci(&values, 0.95, 1000, &mut rng)?;
    Ok(MethodAgg { method, mean, ci_lo, ci_hi, used: values.len(), skipped, values })
}

/// The model spectrum a sweep config induces on a pool, using the
/// sweep's seed derivation. Exposed so callers can pick a model for a
/// bias check consistently with the sweeps.
pub fn spectrum_for(cfg: &SweepConfig, pool: &SyntheticPool) -> Result<Vec<SpectrumModel>> {
    let mut spectrum_rng = ChaCha8Rng::seed_from_u64(cfg.base_seed ^ SPECTRUM_SALT);
    gen_model_spectrum(
        pool,
        &cfg.spectrum_sizes,
        &LearnerConfig::default(),
        cfg.tie,
        &mut spectrum_rng,
    )
}

/// Estimation-error sweep: for every spectrum model and oracle noise
/// level, the mean absolute error of each estimator against the model's
/// ground-truth AUROC over replicated trial draws.
pub fn run_mae_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let pool = build_pool(&cfg.dgp)?;
    let spectrum = spectrum_for(cfg, &pool)?;
    let (pool_omega, pool_tau) = oracle_vectors(&pool, cfg.oracle_basis);
    let npw_cfg = cfg.npw_config();

    // replicate -> (model, noise, method) -> Option<estimate>
    let per_replicate: Vec<Vec<Vec<Vec<Option<f64>>>>> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.base_seed.wrapping_add(r as u64));
            let draw = subsample_rct(&pool, cfg.n_rct, cfg.dgp.pi, &mut rng)?;
            let mut per_noise = Vec::with_capacity(cfg.noise_grid.len());
            for &v in &cfg.noise_grid {
                let nuisance =
                    replicate_nuisance(cfg, &pool_omega, &pool_tau, &draw, v, &mut rng, r);
                let mut per_model = Vec::with_capacity(spectrum.len());
                for model in &spectrum {
                    let scores =
                        ScoreSet::new(&model.score_set.model_name, draw.gather(&model.score_set.scores))?;
                    let mut per_method = Vec::with_capacity(cfg.estimator_set.len());
                    for &method in &cfg.estimator_set {
                        let est = match (&nuisance, method.needs_nuisance()) {
                            (Ok(nu), _) => {
                                estimate(&draw.dataset, &scores, method, Some(nu), &npw_cfg)
                            }
                            (Err(_), false) => {
                                estimate(&draw.dataset, &scores, method, None, &npw_cfg)
                            }
                            (Err(_), true) => Err(EvalError::DegenerateWeighting),
                        };
                        per_method.push(match est {
                            Ok(e) => Some(e.value),
                            Err(e) if e.is_degenerate() => None,
                            Err(e) => return Err(e),
                        });
                    }
                    per_model.push(per_method);
                }
                per_noise.push(per_model);
            }
            Ok(per_noise)
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    let mut row_index = 0usize;
    for (vi, &v) in cfg.noise_grid.iter().enumerate() {
        for (mi, model) in spectrum.iter().enumerate() {
            let mut methods = Vec::with_capacity(cfg.estimator_set.len());
            for (ki, &method) in cfg.estimator_set.iter().enumerate() {
                let mut errors = Vec::with_capacity(cfg.replications);
                let mut skipped = 0usize;
                for rep in &per_replicate {
                    match rep[vi][mi][ki] {
                        Some(value) => errors.push((value - model.true_auc).abs()),
                        None => skipped += 1,
                    }
                }
                methods.push(aggregate(cfg.base_seed, row_index, method, errors, skipped)?);
                row_index += 1;
            }
            cells.push(SweepCell {
                setting: format!("model={};v={}", model.score_set.model_name, v),
                model_name: Some(model.score_set.model_name.clone()),
                true_auc: Some(model.true_auc),
                noise_variance: Some(v),
                ate: Some(cfg.dgp.delta),
                methods,
            });
        }
    }
    Ok(SweepOutcome {
        metric: "mae".into(),
        cells,
        provenance: serde_json::json!({ "kind": "mae_sweep", "config": cfg }),
    })
}

/// Ranking-quality sweep: for every treatment-effect level and noise
/// level, the concordance between each estimator's model ranking and the
/// ground-truth ranking, over replicated trial draws.
pub fn run_cindex_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    if cfg.ate_grid.is_empty() {
        return Err(EvalError::InvalidInput("ate grid is empty".into()));
    }
    if cfg.spectrum_sizes.len() < 5 {
        return Err(EvalError::InvalidInput("ranking sweep needs at least 5 models".into()));
    }
    let npw_cfg = cfg.npw_config();
    let mut cells = Vec::new();
    let mut row_index = 0usize;
    for &ate in &cfg.ate_grid {
        let dgp = DgpConfig { delta: ate, ..cfg.dgp.clone() };
        let pool = build_pool(&dgp)?;
        let spectrum = spectrum_for(cfg, &pool)?;
        let true_aucs: Vec<f64> = spectrum.iter().map(|m| m.true_auc).collect();
        let (pool_omega, pool_tau) = oracle_vectors(&pool, cfg.oracle_basis);

        // replicate -> (noise, method) -> Option<c-index>
        let per_replicate: Vec<Vec<Vec<Option<f64>>>> = (0..cfg.replications)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.base_seed.wrapping_add(r as u64));
                let draw = subsample_rct(&pool, cfg.n_rct, dgp.pi, &mut rng)?;
                let sub_scores: Vec<ScoreSet> = spectrum
                    .iter()
                    .map(|m| {
                        ScoreSet::new(&m.score_set.model_name, draw.gather(&m.score_set.scores))
                    })
                    .collect::<Result<_>>()?;
                let mut per_noise = Vec::with_capacity(cfg.noise_grid.len());
                for &v in &cfg.noise_grid {
                    let nuisance =
                        replicate_nuisance(cfg, &pool_omega, &pool_tau, &draw, v, &mut rng, r);
                    let mut per_method = Vec::with_capacity(cfg.estimator_set.len());
                    for &method in &cfg.estimator_set {
                        let mut estimates = Vec::with_capacity(spectrum.len());
                        let mut degenerate = false;
                        for scores in &sub_scores {
                            let est = match (&nuisance, method.needs_nuisance()) {
                                (Ok(nu), _) => {
                                    estimate(&draw.dataset, scores, method, Some(nu), &npw_cfg)
                                }
                                (Err(_), false) => {
                                    estimate(&draw.dataset, scores, method, None, &npw_cfg)
                                }
                                (Err(_), true) => Err(EvalError::DegenerateWeighting),
                            };
                            match est {
                                Ok(e) => estimates.push(e.value),
                                Err(e) if e.is_degenerate() => {
                                    degenerate = true;
                                    break;
                                }
                                Err(e) => return Err(e),
                            }
                        }
                        if degenerate {
                            per_method.push(None);
                        } else {
                            per_method.push(Some(c_index(&estimates, &true_aucs)?));
                        }
                    }
                    per_noise.push(per_method);
                }
                Ok(per_noise)
            })
            .collect::<Result<_>>()?;

        for (vi, &v) in cfg.noise_grid.iter().enumerate() {
            let mut methods = Vec::with_capacity(cfg.estimator_set.len());
            for (ki, &method) in cfg.estimator_set.iter().enumerate() {
                let mut values = Vec::with_capacity(cfg.replications);
                let mut skipped = 0usize;
                for rep in &per_replicate {
                    match rep[vi][ki] {
                        Some(ci) => values.push(ci),
                        None => skipped += 1,
                    }
                }
                methods.push(aggregate(cfg.base_seed, row_index, method, values, skipped)?);
                row_index += 1;
            }
            cells.push(SweepCell {
                setting: format!("ate={ate};v={v}"),
                model_name: None,
                true_auc: None,
                noise_variance: Some(v),
                ate: Some(ate),
                methods,
            });
        }
    }
    Ok(SweepOutcome {
        metric: "c_index".into(),
        cells,
        provenance: serde_json::json!({ "kind": "cindex_sweep", "config": cfg }),
    })
}

/// One method's row of a bias check.
///
/// `empirical_bias` follows the theory-side convention: ground truth
/// minus the replicate mean of the estimate, so it is directly comparable
/// to the predicted `alpha*delta - beta*sigma` shortfall.
#[derive(Debug, Clone, Serialize)]
pub struct BiasCheckRow {
    pub method: Method,
    pub mean_estimate: f64,
    pub empirical_bias: f64,
    /// Theoretical prediction for naive; 0 for the unbiased estimators;
    /// absent for the pooled estimator.
    pub predicted_bias: Option<f64>,
    /// empirical_bias - predicted_bias where a prediction exists.
    pub gap: Option<f64>,
    pub mc_se: f64,
    pub used: usize,
    pub skipped: usize,
}

/// Bias-check output with the pool-level theory quantities used for the
/// prediction.
#[derive(Debug, Clone, Serialize)]
pub struct BiasCheckReport {
    pub true_auc: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta_f: f64,
    pub sigma_f: f64,
    pub rows: Vec<BiasCheckRow>,
    pub provenance: serde_json::Value,
}

/// Monte Carlo bias verification for one model: replicate the trial
/// draw, average each estimator, and compare the naive estimator's
/// shortfall against the theoretical prediction computed from realized
/// pool quantities (realized potential outcomes give the exact
/// conditional benchmark for a fixed pool).
pub fn run_bias_check(cfg: &SweepConfig, pool_scores: &ScoreSet) -> Result<BiasCheckReport> {
    cfg.validate()?;
    let pool = build_pool(&cfg.dgp)?;
    if pool_scores.len() != pool.len() {
        return Err(EvalError::LengthMismatch {
            left: pool_scores.len(),
            right: pool.len(),
            context: "pool scores vs pool size",
        });
    }
    let truth = true_auc(&pool, &pool_scores.scores, cfg.tie)?;
    let delta_f = truth - 0.5;
    // Population quantities realized on the pool. The CDF uses half ties:
    // the expected-CDF-equals-one-half step of the bias derivation is
    // exact in-sample only under half scoring.
    let realized_tau = pool.realized_tau();
    let cdf = empirical_cdf(&pool_scores.scores, &pool_scores.scores, TiePolicy::Half)?;
    let sigma = sigma_f(&realized_tau, &cdf)?;
    let mu0 = pool.y0.iter().map(|&v| v as f64).sum::<f64>() / pool.len() as f64;
    let mu1 = pool.y1.iter().map(|&v| v as f64).sum::<f64>() / pool.len() as f64;
    let params = PopulationParams::new(cfg.dgp.pi, mu0, mu1)?;
    let (alpha, beta) = bias_params(&params);
    let predicted_naive = naive_bias(&params, delta_f, sigma);

    let (pool_omega, pool_tau) = oracle_vectors(&pool, cfg.oracle_basis);
    let npw_cfg = cfg.npw_config();
    let noise = cfg.noise_grid.first().copied().unwrap_or(0.0);

    let per_replicate: Vec<Vec<Option<f64>>> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.base_seed.wrapping_add(r as u64));
            let draw = subsample_rct(&pool, cfg.n_rct, cfg.dgp.pi, &mut rng)?;
            let scores =
                ScoreSet::new(&pool_scores.model_name, draw.gather(&pool_scores.scores))?;
            let nuisance =
                replicate_nuisance(cfg, &pool_omega, &pool_tau, &draw, noise, &mut rng, r);
            let mut out = Vec::with_capacity(cfg.estimator_set.len());
            for &method in &cfg.estimator_set {
                let est = match (&nuisance, method.needs_nuisance()) {
                    (Ok(nu), _) => estimate(&draw.dataset, &scores, method, Some(nu), &npw_cfg),
                    (Err(_), false) => estimate(&draw.dataset, &scores, method, None, &npw_cfg),
                    (Err(_), true) => Err(EvalError::DegenerateWeighting),
                };
                out.push(match est {
                    Ok(e) => Some(e.value),
                    Err(e) if e.is_degenerate() => None,
                    Err(e) => return Err(e),
                });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(cfg.estimator_set.len());
    for (ki, &method) in cfg.estimator_set.iter().enumerate() {
        let values: Vec<f64> = per_replicate.iter().filter_map(|rep| rep[ki]).collect();
        let skipped = cfg.replications - values.len();
        if values.is_empty() {
            return Err(EvalError::InvalidInput(format!(
                "all replicates degenerate for method {method}"
            )));
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
            / (values.len().saturating_sub(1).max(1)) as f64;
        let mc_se = (var / values.len() as f64).sqrt();
        let empirical = truth - mean;
        let predicted = match method {
            Method::Naive => Some(predicted_naive),
            Method::AllData => None,
            _ => Some(0.0),
        };
        rows.push(BiasCheckRow {
            method,
            mean_estimate: mean,
            empirical_bias: empirical,
            predicted_bias: predicted,
            gap: predicted.map(|p| empirical - p),
            mc_se,
            used: values.len(),
            skipped,
        });
    }
    Ok(BiasCheckReport {
        true_auc: truth,
        alpha,
        beta,
        delta_f,
        sigma_f: sigma,
        rows,
        provenance: serde_json::json!({
            "kind": "bias_check",
            "model": pool_scores.model_name,
            "config": cfg,
        }),
    })
}

/// A repetition source for power analysis: each repetition draws `n`
/// rows (without replacement) of (outcome, treatment, score_a, score_b,
/// nuisance) tuples.
pub struct PowerDraw {
    pub outcome: Vec<u8>,
    pub treatment: Vec<u8>,
    pub pi: f64,
    pub scores_a: Vec<f64>,
    pub scores_b: Vec<f64>,
    pub omega_hat: Vec<f64>,
    pub tau_hat: Vec<f64>,
}

/// One sample-size row of a power analysis.
#[derive(Debug, Clone, Serialize)]
pub struct PowerRow {
    pub n: usize,
    pub power: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub valid_repetitions: usize,
    pub invalid_repetitions: usize,
    /// Bootstrap p-value per repetition (None when the repetition was
    /// invalidated by degenerate draws); not serialized.
    #[serde(skip)]
    pub p_values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerOutcome {
    pub method: Method,
    pub significance: f64,
    pub rows: Vec<PowerRow>,
    pub provenance: serde_json::Value,
}

impl PowerOutcome {
    /// Recompute power at a different significance level from the stored
    /// p-values.
    pub fn power_at(&self, row: usize, alpha: f64) -> f64 {
        let ps: Vec<f64> = self.rows[row].p_values.iter().flatten().copied().collect();
        if ps.is_empty() {
            return f64::NAN;
        }
        ps.iter().filter(|&&p| p < alpha).count() as f64 / ps.len() as f64
    }

    pub fn to_report(&self) -> ExperimentReport {
        ExperimentReport {
            metric: "power".into(),
            provenance: self.provenance.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| ReportRow {
                    setting: format!("n={}", r.n),
                    methods: vec![MethodSummary {
                        method: self.method.to_string(),
                        mean: r.power,
                        ci_lo: r.ci_lo,
                        ci_hi: r.ci_hi,
                        used: r.valid_repetitions,
                        skipped: r.invalid_repetitions,
                    }],
                })
                .collect(),
        }
    }
}

/// Core power loop over a repetition-draw closure.
///
/// For each n in the grid and each repetition: draw n rows, then
/// bootstrap the rows B times; the p-value is the share of bootstrap
/// draws where the null-favored model (a) scores at least as high as the
/// candidate (b) — ties count against the alternative. A bootstrap draw
/// whose estimate is degenerate is skipped; a repetition with more than
/// half its draws degenerate is invalid.
fn run_power_core<F>(
    draw_fn: F,
    method: Method,
    cfg: &PowerConfig,
    tie: TiePolicy,
    provenance: serde_json::Value,
) -> Result<PowerOutcome>
where
    F: Fn(usize, usize, &mut ChaCha8Rng) -> Result<PowerDraw> + Sync,
{
    cfg.validate()?;
    let npw_cfg = NpwConfig { tie, ..NpwConfig::default() };
    let mut rows = Vec::with_capacity(cfg.n_grid.len());
    for (ni, &n) in cfg.n_grid.iter().enumerate() {
        let p_values: Vec<Option<f64>> = (0..cfg.repetitions)
            .into_par_iter()
            .map(|r| {
                let rep_seed =
                    cfg.base_seed.wrapping_add((ni * cfg.repetitions + r) as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
                let drawn = match draw_fn(n, r, &mut rng) {
                    Ok(d) => d,
                    Err(e) if e.is_degenerate() => return Ok(None),
                    Err(e) => return Err(e),
                };
                let b_total = cfg.bootstrap_samples;
                let mut at_least = 0usize;
                let mut degenerate = 0usize;
                for _ in 0..b_total {
                    let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                    let outcome: Vec<u8> = idx.iter().map(|&i| drawn.outcome[i]).collect();
                    let treatment: Vec<u8> = idx.iter().map(|&i| drawn.treatment[i]).collect();
                    let dataset =
                        RctDataset::without_features(outcome, treatment, drawn.pi)?;
                    let sa = ScoreSet::new("a", idx.iter().map(|&i| drawn.scores_a[i]).collect())?;
                    let sb = ScoreSet::new("b", idx.iter().map(|&i| drawn.scores_b[i]).collect())?;
                    let nuisance = if method.needs_nuisance() {
                        Some(NuisanceEstimates::from_vectors(
                            idx.iter().map(|&i| drawn.omega_hat[i]).collect(),
                            idx.iter().map(|&i| drawn.tau_hat[i]).collect(),
                            crate::data::NuisanceScope::FullSample,
                        )?)
                    } else {
                        None
                    };
                    let ea = estimate(&dataset, &sa, method, nuisance.as_ref(), &npw_cfg);
                    let eb = estimate(&dataset, &sb, method, nuisance.as_ref(), &npw_cfg);
                    match (ea, eb) {
                        (Ok(a), Ok(b)) => {
                            if a.value >= b.value {
                                at_least += 1;
                            }
                        }
                        (Err(e), _) | (_, Err(e)) if e.is_degenerate() => degenerate += 1,
                        (Err(e), _) | (_, Err(e)) => return Err(e),
                    }
                }
                if degenerate * 2 > b_total {
                    return Ok(None);
                }
                Ok(Some(at_least as f64 / (b_total - degenerate) as f64))
            })
            .collect::<Result<_>>()?;

        let valid: Vec<f64> = p_values.iter().flatten().copied().collect();
        let invalid = p_values.len() - valid.len();
        if valid.is_empty() {
            return Err(EvalError::InvalidInput(format!("all repetitions invalid at n={n}")));
        }
        let rejections: Vec<f64> = valid
            .iter()
            .map(|&p| f64::from(u8::from(p < cfg.significance)))
            .collect();
        let power = rejections.iter().sum::<f64>() / rejections.len() as f64;
        let mut ci_rng = ChaCha8Rng::seed_from_u64(cfg.base_seed ^ CI_SALT ^ (ni as u64));
        let (ci_lo, ci_hi) = bootstrap_ci(&rejections, 0.95, 1000, &mut ci_rng)?;
        rows.push(PowerRow {
            n,
            power,
            ci_lo,
            ci_hi,
            valid_repetitions: valid.len(),
            invalid_repetitions: invalid,
            p_values,
        });
    }
    Ok(PowerOutcome { method, significance: cfg.significance, rows, provenance })
}

/// Power analysis sourced from a synthetic pool: each repetition draws a
/// fresh trial of size n with treatment probability `pi`, and oracle
/// nuisances perturbed at `nuisance_variance`.
#[allow(clippy::too_many_arguments)]
pub fn run_power_pool(
    pool: &SyntheticPool,
    pi: f64,
    scores_a: &ScoreSet,
    scores_b: &ScoreSet,
    method: Method,
    nuisance_variance: f64,
    oracle_basis: OracleBasis,
    cfg: &PowerConfig,
    tie: TiePolicy,
) -> Result<PowerOutcome> {
    if scores_a.len() != pool.len() || scores_b.len() != pool.len() {
        return Err(EvalError::LengthMismatch {
            left: scores_a.len().max(scores_b.len()),
            right: pool.len(),
            context: "pool scores vs pool size",
        });
    }
    let (pool_omega, pool_tau) = oracle_vectors(pool, oracle_basis);
    let provenance = serde_json::json!({
        "kind": "power",
        "source": "pool",
        "model_a": scores_a.model_name,
        "model_b": scores_b.model_name,
        "nuisance_variance": nuisance_variance,
        "config": cfg,
    });
    run_power_core(
        |n, _rep, rng| {
            let draw = subsample_rct(pool, n, pi, rng)?;
            let nuisance = noisy_oracle(
                &draw.gather(&pool_omega),
                &draw.gather(&pool_tau),
                nuisance_variance,
                rng,
            )?;
            Ok(PowerDraw {
                outcome: draw.dataset.outcome.clone(),
                treatment: draw.dataset.treatment.clone(),
                pi,
                scores_a: draw.gather(&scores_a.scores),
                scores_b: draw.gather(&scores_b.scores),
                omega_hat: nuisance.omega_hat,
                tau_hat: nuisance.tau_hat,
            })
        },
        method,
        cfg,
        tie,
        provenance,
    )
}

/// Where a dataset-sourced power analysis gets its nuisance estimates.
#[derive(Debug, Clone)]
pub enum PowerNuisance<'a> {
    /// No nuisance estimates (only valid for methods that ignore them).
    None,
    /// Full-dataset vectors, subset per repetition draw.
    Provided(&'a NuisanceEstimates),
    /// Cross-fit on each repetition's n drawn rows, mirroring the
    /// evaluate-with-n-estimate-with-n protocol.
    CrossFitPerDraw(CrossFitConfig),
}

/// Power analysis sourced from a fixed trial dataset: each repetition
/// draws n of its rows without replacement.
pub fn run_power_dataset(
    dataset: &RctDataset,
    scores_a: &ScoreSet,
    scores_b: &ScoreSet,
    nuisance: PowerNuisance<'_>,
    method: Method,
    cfg: &PowerConfig,
    tie: TiePolicy,
) -> Result<PowerOutcome> {
    let n_total = dataset.len();
    if scores_a.len() != n_total || scores_b.len() != n_total {
        return Err(EvalError::LengthMismatch {
            left: scores_a.len().max(scores_b.len()),
            right: n_total,
            context: "scores vs dataset size",
        });
    }
    match (&nuisance, method.needs_nuisance()) {
        (PowerNuisance::None, true) => {
            return Err(EvalError::InvalidInput(format!(
                "method {method} requires nuisance estimates"
            )))
        }
        (PowerNuisance::Provided(nu), _) if nu.omega_hat.len() != n_total => {
            return Err(EvalError::LengthMismatch {
                left: nu.omega_hat.len(),
                right: n_total,
                context: "nuisance vs dataset size",
            });
        }
        _ => {}
    }
    if cfg.n_grid.iter().any(|&n| n > n_total) {
        return Err(EvalError::InvalidInput("n grid exceeds dataset size".into()));
    }
    let provenance = serde_json::json!({
        "kind": "power",
        "source": "dataset",
        "model_a": scores_a.model_name,
        "model_b": scores_b.model_name,
        "config": cfg,
    });
    run_power_core(
        |n, rep, rng| {
            let idx: Vec<usize> = rand::seq::index::sample(rng, n_total, n).into_vec();
            let (omega, tau) = match &nuisance {
                PowerNuisance::Provided(nu) => (
                    idx.iter().map(|&i| nu.omega_hat[i]).collect(),
                    idx.iter().map(|&i| nu.tau_hat[i]).collect(),
                ),
                PowerNuisance::CrossFitPerDraw(cf) => {
                    let mut features =
                        ndarray::Array2::zeros((n, dataset.features.ncols()));
                    for (r, &i) in idx.iter().enumerate() {
                        features.row_mut(r).assign(&dataset.features.row(i));
                    }
                    let drawn = RctDataset::new(
                        features,
                        idx.iter().map(|&i| dataset.outcome[i]).collect(),
                        idx.iter().map(|&i| dataset.treatment[i]).collect(),
                        dataset.randomization_prob,
                    )?;
                    let cf = CrossFitConfig {
                        seed: cf.seed.wrapping_add(rep as u64),
                        ..cf.clone()
                    };
                    let out = cross_fit_nuisance(&drawn, &cf)?;
                    (out.nuisance.omega_hat, out.nuisance.tau_hat)
                }
                PowerNuisance::None => (vec![0.5; n], vec![0.0; n]),
            };
            Ok(PowerDraw {
                outcome: idx.iter().map(|&i| dataset.outcome[i]).collect(),
                treatment: idx.iter().map(|&i| dataset.treatment[i]).collect(),
                pi: dataset.randomization_prob,
                scores_a: idx.iter().map(|&i| scores_a.scores[i]).collect(),
                scores_b: idx.iter().map(|&i| scores_b.scores[i]).collect(),
                omega_hat: omega,
                tau_hat: tau,
            })
        },
        method,
        cfg,
        tie,
        provenance,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bootstrap_ci_constant_vector_collapses() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (lo, hi) = bootstrap_ci(&[0.7; 25], 0.95, 200, &mut rng).unwrap();
        assert_eq!(lo, 0.7);
        assert_eq!(hi, 0.7);
    }

    #[test]
    fn bootstrap_ci_single_value_degenerates() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (lo, hi) = bootstrap_ci(&[0.3], 0.95, 100, &mut rng).unwrap();
        assert_eq!((lo, hi), (0.3, 0.3));
    }

    #[test]
    fn bootstrap_ci_width_tracks_clt() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let values: Vec<f64> = {
            use rand_distr::{Distribution, Normal};
            let normal = Normal::new(0.0, 1.0).unwrap();
            (0..1000).map(|_| normal.sample(&mut rng)).collect()
        };
        let (lo, hi) = bootstrap_ci(&values, 0.95, 2000, &mut rng).unwrap();
        let width = hi - lo;
        let expect = 2.0 * 1.96 / (1000f64).sqrt();
        assert!(
            (width - expect).abs() / expect < 0.2,
            "width {width} vs CLT {expect}"
        );
    }

    #[test]
    fn bootstrap_ci_brackets_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let values = vec![0.0, 0.0, 0.0, 10.0];
        let mean = 2.5;
        let (lo, hi) = bootstrap_ci(&values, 0.95, 500, &mut rng).unwrap();
        assert!(lo <= mean && mean <= hi);
    }

    fn tiny_sweep_config() -> SweepConfig {
        SweepConfig {
            dgp: DgpConfig { pool_size: 4000, delta: 0.2, seed: 5, ..DgpConfig::default() },
            n_rct: 120,
            replications: 8,
            noise_grid: vec![0.01],
            ate_grid: vec![0.1, 0.2],
            spectrum_sizes: vec![25, 60, 150, 400, 900],
            base_seed: 11,
            ..SweepConfig::default()
        }
    }

    #[test]
    fn mae_sweep_is_deterministic_and_complete() {
        let cfg = tiny_sweep_config();
        let a = run_mae_sweep(&cfg).unwrap();
        let b = run_mae_sweep(&cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a.to_report()).unwrap(),
            serde_json::to_string(&b.to_report()).unwrap()
        );
        assert_eq!(a.cells.len(), 5); // models x one noise level
        for cell in &a.cells {
            for m in &cell.methods {
                assert_eq!(m.used + m.skipped, cfg.replications);
                if m.used > 0 {
                    assert!(m.ci_lo <= m.mean && m.mean <= m.ci_hi);
                }
            }
        }
    }

    #[test]
    fn mae_single_replicate_collapses_ci() {
        let cfg = SweepConfig { replications: 1, ..tiny_sweep_config() };
        let out = run_mae_sweep(&cfg).unwrap();
        for cell in &out.cells {
            for m in &cell.methods {
                if m.used == 1 {
                    assert_eq!(m.ci_lo, m.mean);
                    assert_eq!(m.ci_hi, m.mean);
                }
            }
        }
    }

    #[test]
    fn cindex_sweep_produces_ate_rows() {
        let cfg = tiny_sweep_config();
        let out = run_cindex_sweep(&cfg).unwrap();
        assert_eq!(out.cells.len(), 2); // two ATEs x one noise level
        for cell in &out.cells {
            assert!(cell.ate.is_some());
            for m in &cell.methods {
                if m.used > 0 {
                    assert!(m.mean >= 0.0 && m.mean <= 1.0);
                }
            }
        }
    }

    #[test]
    fn bias_check_zero_delta_is_unbiased() {
        let cfg = SweepConfig {
            dgp: DgpConfig { pool_size: 20_000, delta: 0.0, seed: 21, ..DgpConfig::default() },
            n_rct: 400,
            replications: 400,
            noise_grid: vec![0.0],
            oracle_basis: OracleBasis::Realized,
            estimator_set: vec![Method::Standard, Method::Naive, Method::Npw],
            base_seed: 31,
            ..SweepConfig::default()
        };
        let pool = build_pool(&cfg.dgp).unwrap();
        let scores = ScoreSet::new("omega", pool.omega_true.clone()).unwrap();
        let report = run_bias_check(&cfg, &scores).unwrap();
        let naive = report.rows.iter().find(|r| r.method == Method::Naive).unwrap();
        // Delta = 0 makes both the prediction and the empirical bias
        // vanish up to Monte Carlo noise.
        assert!(naive.predicted_bias.unwrap().abs() < 1e-3);
        assert!(
            naive.empirical_bias.abs() < 4.0 * naive.mc_se + 1e-3,
            "bias {} vs se {}",
            naive.empirical_bias,
            naive.mc_se
        );
    }

    #[test]
    fn power_null_with_identical_scores_never_rejects() {
        // Literally identical score vectors tie in every bootstrap draw,
        // so p = 1 and power = 0. (Null calibration against equal-quality
        // but distinct models is covered in the acceptance suite.)
        let pool = build_pool(&DgpConfig {
            pool_size: 3000,
            delta: 0.1,
            seed: 41,
            ..DgpConfig::default()
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise: Vec<f64> = (0..pool.len()).map(|_| rng.gen::<f64>()).collect();
        let a = ScoreSet::new("a", noise.clone()).unwrap();
        let b = ScoreSet::new("b", noise).unwrap();
        let cfg = PowerConfig {
            n_grid: vec![80],
            bootstrap_samples: 200,
            repetitions: 10,
            ..PowerConfig::default()
        };
        let out = run_power_pool(
            &pool,
            0.5,
            &a,
            &b,
            Method::Standard,
            0.0,
            OracleBasis::Probability,
            &cfg,
            TiePolicy::Half,
        )
        .unwrap();
        assert_eq!(out.rows[0].power, 0.0);
        for p in out.rows[0].p_values.iter().flatten() {
            assert_eq!(*p, 1.0);
        }
    }

    #[test]
    fn power_alpha_monotonicity_from_stored_pvalues() {
        let pool = build_pool(&DgpConfig {
            pool_size: 5000,
            delta: 0.1,
            seed: 43,
            ..DgpConfig::default()
        })
        .unwrap();
        // Two models of clearly different quality.
        let good = ScoreSet::new("good", pool.omega_true.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let noisy: Vec<f64> = pool
            .omega_true
            .iter()
            .map(|&o| o + rng.gen_range(-0.5..0.5))
            .collect();
        let weak = ScoreSet::new("weak", noisy).unwrap();
        let cfg = PowerConfig {
            n_grid: vec![150],
            bootstrap_samples: 200,
            repetitions: 20,
            ..PowerConfig::default()
        };
        let out = run_power_pool(
            &pool,
            0.5,
            &weak,
            &good,
            Method::Standard,
            0.0,
            OracleBasis::Probability,
            &cfg,
            TiePolicy::Half,
        )
        .unwrap();
        assert!(out.power_at(0, 0.01) <= out.power_at(0, 0.05) + 1e-12);
    }

    #[test]
    fn pi_zero_sweep_collapses_methods_to_standard() {
        let cfg = SweepConfig {
            dgp: DgpConfig {
                pool_size: 3000,
                delta: 0.2,
                pi: 0.0,
                seed: 51,
                ..DgpConfig::default()
            },
            n_rct: 100,
            replications: 5,
            noise_grid: vec![0.0],
            spectrum_sizes: vec![30, 80, 200, 500, 1000],
            estimator_set: vec![Method::Standard, Method::Naive, Method::Npw],
            base_seed: 13,
            ..SweepConfig::default()
        };
        let out = run_mae_sweep(&cfg).unwrap();
        for cell in &out.cells {
            let std = cell.methods.iter().find(|m| m.method == Method::Standard).unwrap();
            for m in &cell.methods {
                assert_eq!(m.values, std.values, "{} diverged at pi=0", m.method);
            }
        }
    }
}
