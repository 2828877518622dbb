//! Flat TOML run-configuration files.
//!
//! Every key is optional and maps onto one field of the cohort, sweep,
//! power, or estimator configuration; unknown keys are rejected with the
//! offending name. CLI flags override file values, which override the
//! built-in defaults.

use std::path::Path;

use rct_auroc::data::Method;
use rct_auroc::dgp::{DgpConfig, TauForm};
use rct_auroc::estimators::{NpwCombine, NpwConfig};
use rct_auroc::harness::{NuisanceMode, OracleBasis, PowerConfig, SweepConfig};
use rct_auroc::metrics::TiePolicy;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    // Cohort generation.
    pub dim: Option<usize>,
    pub pool_size: Option<usize>,
    pub delta: Option<f64>,
    pub pi: Option<f64>,
    pub w_y_density: Option<f64>,
    pub w_tau_values: Option<Vec<f64>>,
    pub w_tau_probs: Option<Vec<f64>>,
    pub prob_clip: Option<f64>,
    pub dgp_seed: Option<u64>,
    pub tau_form: Option<String>,

    // Sweeps.
    pub n_rct: Option<usize>,
    pub replications: Option<usize>,
    pub ate_grid: Option<Vec<f64>>,
    pub noise_grid: Option<Vec<f64>>,
    pub nuisance_mode: Option<String>,
    pub oracle_basis: Option<String>,
    pub estimator_set: Option<Vec<String>>,
    pub tie: Option<String>,
    pub base_seed: Option<u64>,
    pub spectrum_sizes: Option<Vec<usize>>,
    pub folds: Option<usize>,

    // Power.
    pub n_grid: Option<Vec<usize>>,
    pub bootstrap_samples: Option<usize>,
    pub repetitions: Option<usize>,
    pub significance: Option<f64>,

    // Estimator settings.
    pub combine: Option<String>,
    pub clip_tau_path: Option<bool>,
    pub epsilon: Option<f64>,
}

impl RunConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::data(format!("config {}: {e}", path.display())))
    }

    pub fn dgp_config(&self) -> Result<DgpConfig, CliError> {
        let mut cfg = DgpConfig::default();
        if let Some(v) = self.dim {
            cfg.dim = v;
        }
        if let Some(v) = self.pool_size {
            cfg.pool_size = v;
        }
        if let Some(v) = self.delta {
            cfg.delta = v;
        }
        if let Some(v) = self.pi {
            cfg.pi = v;
        }
        if let Some(v) = self.w_y_density {
            cfg.w_y_density = v;
        }
        if let Some(v) = &self.w_tau_values {
            cfg.w_tau_values = v.clone();
        }
        if let Some(v) = &self.w_tau_probs {
            cfg.w_tau_probs = v.clone();
        }
        if let Some(v) = self.prob_clip {
            cfg.prob_clip = v;
        }
        if let Some(v) = self.dgp_seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.tau_form {
            cfg.tau_form = match v.as_str() {
                "linear" => TauForm::Linear,
                "sigmoid_complement" => TauForm::SigmoidComplement,
                other => {
                    return Err(CliError::data(format!(
                        "unknown tau_form `{other}` (linear|sigmoid_complement)"
                    )))
                }
            };
        }
        cfg.validate().map_err(CliError::from_eval)?;
        Ok(cfg)
    }

    pub fn sweep_config(&self) -> Result<SweepConfig, CliError> {
        let mut cfg = SweepConfig { dgp: self.dgp_config()?, ..SweepConfig::default() };
        if let Some(v) = self.n_rct {
            cfg.n_rct = v;
        }
        if let Some(v) = self.replications {
            cfg.replications = v;
        }
        if let Some(v) = &self.ate_grid {
            cfg.ate_grid = v.clone();
        }
        if let Some(v) = &self.noise_grid {
            cfg.noise_grid = v.clone();
        }
        if let Some(v) = &self.nuisance_mode {
            cfg.nuisance_mode = match v.as_str() {
                "oracle_noisy" => NuisanceMode::OracleNoisy,
                "cross_fit" => NuisanceMode::CrossFit,
                other => {
                    return Err(CliError::data(format!(
                        "unknown nuisance_mode `{other}` (oracle_noisy|cross_fit)"
                    )))
                }
            };
        }
        if let Some(v) = &self.oracle_basis {
            cfg.oracle_basis = match v.as_str() {
                "probability" => OracleBasis::Probability,
                "realized" => OracleBasis::Realized,
                other => {
                    return Err(CliError::data(format!(
                        "unknown oracle_basis `{other}` (probability|realized)"
                    )))
                }
            };
        }
        if let Some(v) = &self.estimator_set {
            cfg.estimator_set = v
                .iter()
                .map(|m| m.parse::<Method>().map_err(CliError::from_eval))
                .collect::<Result<_, _>>()?;
        }
        if let Some(v) = &self.tie {
            cfg.tie = v.parse::<TiePolicy>().map_err(CliError::from_eval)?;
        }
        if let Some(v) = self.base_seed {
            cfg.base_seed = v;
        }
        if let Some(v) = &self.spectrum_sizes {
            cfg.spectrum_sizes = v.clone();
        }
        if let Some(v) = self.folds {
            cfg.folds = v;
        }
        Ok(cfg)
    }

    pub fn power_config(&self) -> Result<PowerConfig, CliError> {
        let mut cfg = PowerConfig::default();
        if let Some(v) = &self.n_grid {
            cfg.n_grid = v.clone();
        }
        if let Some(v) = self.bootstrap_samples {
            cfg.bootstrap_samples = v;
        }
        if let Some(v) = self.repetitions {
            cfg.repetitions = v;
        }
        if let Some(v) = self.significance {
            cfg.significance = v;
        }
        if let Some(v) = self.base_seed {
            cfg.base_seed = v;
        }
        Ok(cfg)
    }

    pub fn npw_config(&self) -> Result<NpwConfig, CliError> {
        let mut cfg = NpwConfig::default();
        if let Some(v) = &self.combine {
            cfg.combine = match v.as_str() {
                "average" => NpwCombine::Average,
                "omega_only" => NpwCombine::OmegaOnly,
                "tau_only" => NpwCombine::TauOnly,
                other => {
                    return Err(CliError::data(format!(
                        "unknown combine `{other}` (average|omega_only|tau_only)"
                    )))
                }
            };
        }
        if let Some(v) = self.clip_tau_path {
            cfg.clip_tau_path = v;
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = &self.tie {
            cfg.tie = v.parse::<TiePolicy>().map_err(CliError::from_eval)?;
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_rejected_by_name() {
        let err = toml::from_str::<RunConfigFile>("puul_size = 10\n").unwrap_err();
        assert!(err.to_string().contains("puul_size"), "{err}");
    }

    #[test]
    fn values_flow_into_configs() {
        let file: RunConfigFile = toml::from_str(
            "delta = 0.3\nn_rct = 150\nnoise_grid = [0.0, 0.5]\nestimator_set = [\"standard\", \"npw\"]\ntie = \"half\"\nbase_seed = 9\n",
        )
        .unwrap();
        let sweep = file.sweep_config().unwrap();
        assert_eq!(sweep.dgp.delta, 0.3);
        assert_eq!(sweep.n_rct, 150);
        assert_eq!(sweep.noise_grid, vec![0.0, 0.5]);
        assert_eq!(sweep.estimator_set, vec![Method::Standard, Method::Npw]);
        assert_eq!(sweep.tie, TiePolicy::Half);
        assert_eq!(sweep.base_seed, 9);
    }

    #[test]
    fn bad_method_name_is_a_data_error() {
        let file: RunConfigFile =
            toml::from_str("estimator_set = [\"no_such_method\"]\n").unwrap();
        assert!(file.sweep_config().is_err());
    }
}
