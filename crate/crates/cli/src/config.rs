//! Run configuration with layered resolution: built-in defaults, then
//! command-line flags, then `CLASSCP_*` environment variables, then the
//! config file. Later layers win.

use std::path::Path;

use anyhow::{Context, Result};
use classcp_core::{ExperimentConfig, FitConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub rank: usize,
    pub lambda_g: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub restarts: usize,
    pub ridge: f64,
    pub seed: u64,
    pub jobs: usize,
    pub min_degree: usize,
    pub train_fraction: f64,
    pub repeats: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let fit = FitConfig::default();
        RunConfig {
            rank: fit.rank,
            lambda_g: fit.lambda_g,
            tol: fit.tol,
            max_iters: fit.max_iters,
            restarts: fit.restarts,
            ridge: fit.ridge,
            seed: fit.seed,
            jobs: 1,
            min_degree: 3,
            train_fraction: 0.8,
            repeats: 10,
        }
    }
}

impl RunConfig {
    pub fn to_fit(&self) -> FitConfig {
        FitConfig {
            rank: self.rank,
            lambda_g: self.lambda_g,
            max_iters: self.max_iters,
            tol: self.tol,
            seed: self.seed,
            restarts: self.restarts,
            ridge: self.ridge,
        }
    }

    pub fn to_experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            fit: self.to_fit(),
            train_fraction: self.train_fraction,
            knn_k: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.to_fit().validate()?;
        anyhow::ensure!(
            self.train_fraction > 0.0 && self.train_fraction < 1.0,
            "train_fraction must lie in (0, 1), got {}",
            self.train_fraction
        );
        anyhow::ensure!(self.repeats >= 1, "repeats must be >= 1");
        anyhow::ensure!(self.jobs >= 1, "jobs must be >= 1");
        Ok(())
    }
}

/// A sparse overlay: only present fields replace the current value.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigPatch {
    pub rank: Option<usize>,
    pub lambda_g: Option<f64>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub restarts: Option<usize>,
    pub ridge: Option<f64>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub min_degree: Option<usize>,
    pub train_fraction: Option<f64>,
    pub repeats: Option<usize>,
}

impl ConfigPatch {
    fn apply_to(&self, cfg: &mut RunConfig) {
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            };
        }
        take!(rank);
        take!(lambda_g);
        take!(tol);
        take!(max_iters);
        take!(restarts);
        take!(ridge);
        take!(seed);
        take!(jobs);
        take!(min_degree);
        take!(train_fraction);
        take!(repeats);
    }
}

pub const ENV_PREFIX: &str = "CLASSCP_";

fn parse_env<T: std::str::FromStr>(
    get: &dyn Fn(&str) -> Option<String>,
    key: &str,
) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    let name = format!("{ENV_PREFIX}{key}");
    match get(&name) {
        None => Ok(None),
        Some(raw) => raw
            .parse()
            .map(Some)
            .map_err(|e| anyhow::anyhow!("invalid {name}={raw}: {e}")),
    }
}

fn env_patch(get: &dyn Fn(&str) -> Option<String>) -> Result<ConfigPatch> {
    Ok(ConfigPatch {
        rank: parse_env(get, "RANK")?,
        lambda_g: parse_env(get, "LAMBDA_G")?,
        tol: parse_env(get, "TOL")?,
        max_iters: parse_env(get, "MAX_ITERS")?,
        restarts: parse_env(get, "RESTARTS")?,
        ridge: parse_env(get, "RIDGE")?,
        seed: parse_env(get, "SEED")?,
        jobs: parse_env(get, "JOBS")?,
        min_degree: parse_env(get, "MIN_DEGREE")?,
        train_fraction: parse_env(get, "TRAIN_FRACTION")?,
        repeats: parse_env(get, "REPEATS")?,
    })
}

fn file_patch(path: &Path) -> Result<ConfigPatch> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    serde_json::from_str(&text)
        .with_context(|| format!("cannot parse config file {}", path.display()))
}

/// Resolves the effective configuration. `get_env` is injected so tests can
/// run without touching the process environment.
pub fn resolve(
    flags: &ConfigPatch,
    get_env: &dyn Fn(&str) -> Option<String>,
    config_file: Option<&Path>,
) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    flags.apply_to(&mut cfg);
    env_patch(get_env)?.apply_to(&mut cfg);
    if let Some(path) = config_file {
        file_patch(path)?.apply_to(&mut cfg);
    }
    cfg.validate()?;
    Ok(cfg)
}
