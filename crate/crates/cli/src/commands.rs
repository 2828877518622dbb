//! Subcommand definitions and dispatch.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use rct_auroc::data::{Method, NuisanceScope, RctDataset, ScoreSet};
use rct_auroc::dgp::{build_pool, gen_model_spectrum, subsample_rct, DgpConfig, TauForm};
use rct_auroc::estimators::{estimate, NpwConfig};
use rct_auroc::harness::{
    run_bias_check, run_cindex_sweep, run_mae_sweep, run_power_dataset, spectrum_for,
    PowerNuisance, SweepConfig,
};
use rct_auroc::metrics::{empirical_cdf, TiePolicy};
use rct_auroc::nuisance::{cross_fit_nuisance, CrossFitConfig, LearnerConfig};
use rct_auroc::theory::{misselection_condition, sigma_f};
use rct_auroc::NuisanceEstimates;

use crate::config::RunConfigFile;
use crate::io::{
    emit, load_csv, render_report, DatasetWriter, Format, LoadedDataset, PiSource,
};
use crate::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "rct-auroc",
    version,
    about = "AUROC estimation under no-intervention from randomized trial data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Estimate AUROC for every score column of a dataset CSV.
    Estimate(EstimateArgs),
    /// Generate a synthetic cohort and emit a trial-sized CSV.
    Simulate(SimulateArgs),
    /// Mean-absolute-error sweep over a generated model spectrum.
    SweepMae(SweepArgs),
    /// Ranking-concordance sweep over treatment-effect settings.
    SweepCindex(SweepArgs),
    /// Monte Carlo bias check against the theoretical prediction.
    BiasCheck(BiasCheckArgs),
    /// Bootstrap power analysis for comparing two models.
    Power(PowerArgs),
    /// Rank score columns by a chosen estimator, with misselection
    /// flags under the naive method.
    Select(SelectArgs),
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    /// Dataset CSV path.
    pub data: PathBuf,
    /// Comma-separated methods, or `all`.
    #[arg(long, default_value = "all")]
    pub method: String,
    /// Randomization probability, or `empirical`.
    #[arg(long, default_value = "0.5")]
    pub pi: PiSource,
    #[arg(long, default_value = "strict")]
    pub tie: TiePolicy,
    /// Folds for cross-fitted nuisances when the file has no
    /// omega_hat/tau_hat columns.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use omega_true/tau_true columns as the nuisance estimates.
    #[arg(long)]
    pub oracle_nuisance: bool,
    /// Clip the tau path into [0,1].
    #[arg(long)]
    pub clip_tau_path: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Output CSV for the trial-sized draw.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional output CSV for the whole pool.
    #[arg(long)]
    pub pool_out: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 0.2)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.5)]
    pub pi: f64,
    #[arg(long, default_value_t = 20)]
    pub dim: usize,
    #[arg(long, default_value_t = 100_000)]
    pub pool_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated training sizes; adds one score__ column per
    /// fitted model.
    #[arg(long)]
    pub spectrum: Option<String>,
    /// Effect-numerator form: linear | sigmoid_complement.
    #[arg(long, default_value = "linear")]
    pub tau_form: String,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the config base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the tie policy.
    #[arg(long)]
    pub tie: Option<TiePolicy>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct BiasCheckArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Index into the generated spectrum (sorted by true AUROC);
    /// defaults to the middle model.
    #[arg(long)]
    pub model_index: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct PowerArgs {
    /// Dataset CSV with at least two score columns.
    pub data: PathBuf,
    /// Null-favored model (score column name); defaults to the first
    /// score column.
    #[arg(long)]
    pub model_a: Option<String>,
    /// Candidate model; defaults to the second score column.
    #[arg(long)]
    pub model_b: Option<String>,
    #[arg(long, default_value = "standard")]
    pub method: String,
    /// Comma-separated sample sizes.
    #[arg(long, default_value = "100,200,400")]
    pub n_grid: String,
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value = "0.5")]
    pub pi: PiSource,
    #[arg(long, default_value = "strict")]
    pub tie: TiePolicy,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct SelectArgs {
    pub data: PathBuf,
    #[arg(long, default_value = "naive")]
    pub method: String,
    #[arg(long, default_value = "0.5")]
    pub pi: PiSource,
    #[arg(long, default_value = "strict")]
    pub tie: TiePolicy,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Estimate(args) => cmd_estimate(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::SweepMae(args) => cmd_sweep(args, SweepKind::Mae),
        Command::SweepCindex(args) => cmd_sweep(args, SweepKind::Cindex),
        Command::BiasCheck(args) => cmd_bias_check(args),
        Command::Power(args) => cmd_power(args),
        Command::Select(args) => cmd_select(args),
    }
}

fn parse_methods(spec: &str) -> Result<Vec<Method>, CliError> {
    if spec == "all" {
        return Ok(Method::ALL.to_vec());
    }
    spec.split(',')
        .map(|m| m.trim().parse::<Method>().map_err(|e| CliError::usage(e.to_string())))
        .collect()
}

fn parse_usize_list(spec: &str, what: &str) -> Result<Vec<usize>, CliError> {
    spec.split(',')
        .map(|v| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| CliError::usage(format!("bad {what} entry `{v}`")))
        })
        .collect()
}

/// Resolve nuisance estimates for a loaded dataset: oracle columns when
/// requested, provided omega_hat/tau_hat columns, otherwise k-fold
/// cross-fitting on the feature columns.
fn resolve_nuisance(
    loaded: &LoadedDataset,
    oracle: bool,
    folds: usize,
    seed: u64,
) -> Result<NuisanceEstimates, CliError> {
    if oracle {
        let (omega, tau) = match (&loaded.omega_true, &loaded.tau_true) {
            (Some(o), Some(t)) => (o.clone(), t.clone()),
            _ => {
                return Err(CliError::data(
                    "--oracle-nuisance needs omega_true and tau_true columns",
                ))
            }
        };
        return NuisanceEstimates::from_vectors(omega, tau, NuisanceScope::FullSample)
            .map_err(CliError::from_eval);
    }
    if let Some(nu) = &loaded.nuisance {
        return Ok(nu.clone());
    }
    if loaded.dataset.features.ncols() == 0 {
        return Err(CliError::data(
            "nuisance-weighted estimation needs omega_hat/tau_hat columns or x_<k> features for cross-fitting",
        ));
    }
    let cf = CrossFitConfig { folds, learner: LearnerConfig::default(), seed };
    cross_fit_nuisance(&loaded.dataset, &cf)
        .map(|out| out.nuisance)
        .map_err(CliError::from_eval)
}

#[derive(Serialize)]
struct EstimateOutput {
    pi: f64,
    tie: String,
    nuisance_source: String,
    estimates: Vec<EstimateRecord>,
}

#[derive(Serialize)]
struct EstimateRecord {
    model: String,
    method: String,
    value: f64,
    n_control: usize,
    n_treated: usize,
    #[serde(skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    diagnostics: std::collections::BTreeMap<String, f64>,
}

fn cmd_estimate(args: EstimateArgs) -> Result<(), CliError> {
    let methods = parse_methods(&args.method)?;
    let loaded = load_csv(&args.data, args.pi)?;
    if loaded.scores.is_empty() {
        return Err(CliError::data("no score__ columns in dataset"));
    }
    let needs_nuisance = methods.iter().any(Method::needs_nuisance);
    let nuisance = if needs_nuisance {
        Some(resolve_nuisance(&loaded, args.oracle_nuisance, args.folds, args.seed)?)
    } else {
        None
    };
    let nuisance_source = if !needs_nuisance {
        "none"
    } else if args.oracle_nuisance {
        "oracle_columns"
    } else if loaded.nuisance.is_some() {
        "columns"
    } else {
        "cross_fit"
    };
    let npw_cfg = NpwConfig { tie: args.tie, clip_tau_path: args.clip_tau_path, ..NpwConfig::default() };
    let mut records = Vec::new();
    for scores in &loaded.scores {
        for &method in &methods {
            let est = estimate(&loaded.dataset, scores, method, nuisance.as_ref(), &npw_cfg)
                .map_err(CliError::from_eval)?;
            records.push(EstimateRecord {
                model: scores.model_name.clone(),
                method: method.to_string(),
                value: est.value,
                n_control: est.n_control,
                n_treated: est.n_treated,
                diagnostics: est.diagnostics,
            });
        }
    }
    let output = EstimateOutput {
        pi: loaded.dataset.randomization_prob,
        tie: args.tie.to_string(),
        nuisance_source: nuisance_source.to_string(),
        estimates: records,
    };
    let json = serde_json::to_string_pretty(&output)
        .map_err(|e| CliError::data(format!("serialization failed: {e}")))?;
    emit(args.out.as_deref(), &json)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let tau_form = match args.tau_form.as_str() {
        "linear" => TauForm::Linear,
        "sigmoid_complement" => TauForm::SigmoidComplement,
        other => return Err(CliError::usage(format!("unknown tau form `{other}`"))),
    };
    let dgp = DgpConfig {
        dim: args.dim,
        pool_size: args.pool_size,
        delta: args.delta,
        pi: args.pi,
        seed: args.seed,
        tau_form,
        ..DgpConfig::default()
    };
    dgp.validate().map_err(CliError::from_eval)?;
    let pool = build_pool(&dgp).map_err(CliError::from_eval)?;

    let spectrum = match &args.spectrum {
        Some(spec) => {
            let sizes = parse_usize_list(spec, "spectrum")?;
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed ^ 0x5350_4543);
            gen_model_spectrum(&pool, &sizes, &LearnerConfig::default(), TiePolicy::Half, &mut rng)
                .map_err(CliError::from_eval)?
        }
        None => Vec::new(),
    };
    let pool_scores: Vec<ScoreSet> = spectrum.iter().map(|m| m.score_set.clone()).collect();

    // Trial-sized draw.
    let mut draw_rng = ChaCha8Rng::seed_from_u64(args.seed ^ 0x5355_4253);
    let draw = subsample_rct(&pool, args.n, args.pi, &mut draw_rng).map_err(CliError::from_eval)?;
    let sub_scores: Vec<ScoreSet> = pool_scores
        .iter()
        .map(|s| ScoreSet::new(s.model_name.clone(), draw.gather(&s.scores)))
        .collect::<Result<_, _>>()
        .map_err(CliError::from_eval)?;
    let sub_y0: Vec<u8> = draw.pool_indices.iter().map(|&i| pool.y0[i]).collect();
    let sub_y1: Vec<u8> = draw.pool_indices.iter().map(|&i| pool.y1[i]).collect();
    let sub_omega = draw.gather(&pool.omega_true);
    let sub_tau: Vec<f64> = {
        let eff = pool.effective_tau();
        draw.gather(&eff)
    };
    let mut writer = DatasetWriter::new(&draw.dataset, &sub_scores);
    writer.y0 = Some(&sub_y0);
    writer.y1 = Some(&sub_y1);
    writer.omega_true = Some(&sub_omega);
    writer.tau_true = Some(&sub_tau);
    crate::io::write_large_csv(&args.out, writer.render())?;

    if let Some(pool_path) = &args.pool_out {
        // The pool file uses the same schema, so it carries an observed
        // (t, y) pair drawn from the potential outcomes.
        let mut t_rng = ChaCha8Rng::seed_from_u64(args.seed ^ 0x504f_4f4c);
        let treatment: Vec<u8> =
            (0..pool.len()).map(|_| u8::from(t_rng.gen::<f64>() < args.pi)).collect();
        let outcome: Vec<u8> = treatment
            .iter()
            .enumerate()
            .map(|(i, &t)| if t == 1 { pool.y1[i] } else { pool.y0[i] })
            .collect();
        let ds = RctDataset::new(pool.features.clone(), outcome, treatment, args.pi)
            .map_err(CliError::from_eval)?;
        let eff = pool.effective_tau();
        let mut writer = DatasetWriter::new(&ds, &pool_scores);
        writer.y0 = Some(&pool.y0);
        writer.y1 = Some(&pool.y1);
        writer.omega_true = Some(&pool.omega_true);
        writer.tau_true = Some(&eff);
        crate::io::write_large_csv(pool_path, writer.render())?;
    }
    Ok(())
}

enum SweepKind {
    Mae,
    Cindex,
}

fn sweep_config_from(args: &SweepArgs) -> Result<SweepConfig, CliError> {
    let file = match &args.config {
        Some(path) => RunConfigFile::load(path)?,
        None => RunConfigFile::default(),
    };
    let mut cfg = file.sweep_config()?;
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
        if file.dgp_seed.is_none() {
            cfg.dgp.seed = seed;
        }
    }
    if let Some(tie) = args.tie {
        cfg.tie = tie;
    }
    Ok(cfg)
}

fn cmd_sweep(args: SweepArgs, kind: SweepKind) -> Result<(), CliError> {
    let cfg = sweep_config_from(&args)?;
    let outcome = match kind {
        SweepKind::Mae => run_mae_sweep(&cfg),
        SweepKind::Cindex => run_cindex_sweep(&cfg),
    }
    .map_err(CliError::from_eval)?;
    let rendered = render_report(&outcome.to_report(), args.format)?;
    emit(args.out.as_deref(), &rendered)
}

fn cmd_bias_check(args: BiasCheckArgs) -> Result<(), CliError> {
    let sweep_args = SweepArgs {
        config: args.config.clone(),
        seed: args.seed,
        tie: None,
        out: None,
        format: Format::Json,
    };
    let cfg = sweep_config_from(&sweep_args)?;
    let pool = build_pool(&cfg.dgp).map_err(CliError::from_eval)?;
    let spectrum = spectrum_for(&cfg, &pool).map_err(CliError::from_eval)?;
    let index = args.model_index.unwrap_or(spectrum.len() / 2);
    let model = spectrum
        .get(index)
        .ok_or_else(|| CliError::usage(format!("model index {index} out of range")))?;
    let report = run_bias_check(&cfg, &model.score_set).map_err(CliError::from_eval)?;
    let rendered = match args.format {
        Format::Json => serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::data(format!("serialization failed: {e}")))?,
        Format::Csv => {
            let mut out = String::from("setting,method,stat,value\n");
            let setting = format!("model={}", model.score_set.model_name);
            for row in &report.rows {
                let mut stats = vec![
                    ("mean_estimate", row.mean_estimate),
                    ("empirical_bias", row.empirical_bias),
                    ("mc_se", row.mc_se),
                ];
                if let Some(p) = row.predicted_bias {
                    stats.push(("predicted_bias", p));
                }
                if let Some(g) = row.gap {
                    stats.push(("gap", g));
                }
                for (stat, value) in stats {
                    out.push_str(&format!("{setting},{},{stat},{value}\n", row.method));
                }
            }
            out
        }
    };
    emit(args.out.as_deref(), &rendered)
}

fn cmd_power(args: PowerArgs) -> Result<(), CliError> {
    let method: Method =
        args.method.parse().map_err(|e: rct_auroc::EvalError| CliError::usage(e.to_string()))?;
    let loaded = load_csv(&args.data, args.pi)?;
    if loaded.scores.len() < 2 {
        return Err(CliError::data("power analysis needs at least two score__ columns"));
    }
    let pick = |name: &Option<String>, default_idx: usize| -> Result<&ScoreSet, CliError> {
        match name {
            Some(n) => loaded
                .scores
                .iter()
                .find(|s| &s.model_name == n)
                .ok_or_else(|| CliError::data(format!("no score column `score__{n}`"))),
            None => Ok(&loaded.scores[default_idx]),
        }
    };
    let scores_a = pick(&args.model_a, 0)?;
    let scores_b = pick(&args.model_b, 1)?;
    let cfg = rct_auroc::harness::PowerConfig {
        n_grid: parse_usize_list(&args.n_grid, "n-grid")?,
        bootstrap_samples: args.bootstrap,
        repetitions: args.reps,
        significance: args.alpha,
        base_seed: args.seed,
    };
    let nuisance = if method.needs_nuisance() {
        match &loaded.nuisance {
            Some(nu) => PowerNuisance::Provided(nu),
            None if loaded.dataset.features.ncols() > 0 => {
                PowerNuisance::CrossFitPerDraw(CrossFitConfig {
                    folds: args.folds,
                    learner: LearnerConfig::default(),
                    seed: args.seed,
                })
            }
            None => {
                return Err(CliError::data(
                    "nuisance-weighted power needs omega_hat/tau_hat columns or x_<k> features",
                ))
            }
        }
    } else {
        PowerNuisance::None
    };
    let outcome =
        run_power_dataset(&loaded.dataset, scores_a, scores_b, nuisance, method, &cfg, args.tie)
            .map_err(CliError::from_eval)?;
    let rendered = render_report(&outcome.to_report(), args.format)?;
    emit(args.out.as_deref(), &rendered)
}

#[derive(Serialize)]
struct SelectOutput {
    method: String,
    tie: String,
    ranking: Vec<RankEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    misselection: Vec<MisselectionEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

#[derive(Serialize)]
struct RankEntry {
    model: String,
    value: f64,
}

#[derive(Serialize)]
struct MisselectionEntry {
    preferred: String,
    other: String,
    estimate_gap: f64,
    sigma_preferred: f64,
    sigma_other: f64,
    beta: f64,
    flagged: bool,
}

fn cmd_select(args: SelectArgs) -> Result<(), CliError> {
    let method: Method =
        args.method.parse().map_err(|e: rct_auroc::EvalError| CliError::usage(e.to_string()))?;
    let loaded = load_csv(&args.data, args.pi)?;
    if loaded.scores.is_empty() {
        return Err(CliError::data("no score__ columns in dataset"));
    }
    let needs_nuisance = method.needs_nuisance() || method == Method::Naive;
    let nuisance = if needs_nuisance {
        match resolve_nuisance(&loaded, false, args.folds, args.seed) {
            Ok(nu) => Some(nu),
            Err(e) if method.needs_nuisance() => return Err(e),
            // The naive ranking itself needs no nuisances; only the
            // misselection flags do.
            Err(_) => None,
        }
    } else {
        None
    };
    let npw_cfg = NpwConfig { tie: args.tie, ..NpwConfig::default() };
    let mut ranking: Vec<RankEntry> = Vec::new();
    for scores in &loaded.scores {
        let est = estimate(&loaded.dataset, scores, method, nuisance.as_ref(), &npw_cfg)
            .map_err(CliError::from_eval)?;
        ranking.push(RankEntry { model: scores.model_name.clone(), value: est.value });
    }
    ranking.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.model.cmp(&b.model)));

    let mut misselection = Vec::new();
    let mut note = None;
    if method == Method::Naive {
        match &nuisance {
            Some(nu) => {
                // Plug-in beta from the treated-arm outcome rate; sigma
                // per model from tau_hat and the in-sample score CDF.
                let split = rct_auroc::data::split_by_treatment(&loaded.dataset);
                if split.treated.is_empty() {
                    return Err(CliError::degenerate("treated arm is empty"));
                }
                let mu1 = split.treated.outcomes.iter().map(|&y| y as f64).sum::<f64>()
                    / split.treated.len() as f64;
                let mu1 = mu1.clamp(rct_auroc::PROB_EPSILON, 1.0 - rct_auroc::PROB_EPSILON);
                let beta = loaded.dataset.randomization_prob / (mu1 * (1.0 - mu1));
                let mut sigmas = std::collections::BTreeMap::new();
                for scores in &loaded.scores {
                    let cdf = empirical_cdf(&scores.scores, &scores.scores, args.tie)
                        .map_err(CliError::from_eval)?;
                    let s = sigma_f(&nu.tau_hat, &cdf).map_err(CliError::from_eval)?;
                    sigmas.insert(scores.model_name.clone(), s);
                }
                for i in 0..ranking.len() {
                    for j in (i + 1)..ranking.len() {
                        let (a, b) = (&ranking[i], &ranking[j]);
                        if a.value <= b.value {
                            continue;
                        }
                        let flagged = misselection_condition(
                            a.value,
                            b.value,
                            beta,
                            sigmas[&a.model],
                            sigmas[&b.model],
                        )
                        .map_err(CliError::from_eval)?;
                        misselection.push(MisselectionEntry {
                            preferred: a.model.clone(),
                            other: b.model.clone(),
                            estimate_gap: a.value - b.value,
                            sigma_preferred: sigmas[&a.model],
                            sigma_other: sigmas[&b.model],
                            beta,
                            flagged,
                        });
                    }
                }
            }
            None => {
                note = Some(
                    "misselection flags skipped: no tau_hat column and no features to cross-fit"
                        .to_string(),
                );
            }
        }
    }
    let output = SelectOutput {
        method: method.to_string(),
        tie: args.tie.to_string(),
        ranking,
        misselection,
        note,
    };
    let json = serde_json::to_string_pretty(&output)
        .map_err(|e| CliError::data(format!("serialization failed: {e}")))?;
    emit(args.out.as_deref(), &json)
}
