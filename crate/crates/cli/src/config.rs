//! Run configuration from `key = value` text, environment overrides and
//! command-line `--set` pairs, applied in that order over the defaults.
//!
//! Environment variables named `TRUSTSIOT_<KEY>` override `<key>`, with
//! `__` standing for the dot in nested keys: `TRUSTSIOT_KGE__DIM=16` sets
//! `kge.dim`. Unknown keys are errors in every source.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use trust_siot_core::direct::DtmRule;
use trust_siot_core::experiment::ExperimentConfig;
use trust_siot_core::features::N_FEATURES;

use crate::formats::read_text;

pub const ENV_PREFIX: &str = "TRUSTSIOT_";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    /// Dataset manifest.
    pub dataset: Option<PathBuf>,
    pub output: PathBuf,
    /// Label for the `dataset` column of metric tables; defaults to the
    /// manifest's name.
    pub name: Option<String>,
    /// Hand-picked feature weights for the weighted-sum baseline.
    pub weights: Option<[f64; N_FEATURES]>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentConfig::default(),
            dataset: None,
            output: PathBuf::from("out"),
            name: None,
            weights: None,
        }
    }
}

/// Every key accepted by [`RunConfig::set`].
pub const KEYS: &[&str] = &[
    "seed",
    "dataset",
    "output",
    "name",
    "lambda",
    "t0",
    "horizon",
    "now",
    "dtm_rule",
    "epsilon",
    "max_iter",
    "th",
    "max_k",
    "kge.dim",
    "kge.epochs",
    "kge.batch",
    "kge.lr",
    "kge.neg",
    "mlp.grid",
    "mlp.l2",
    "mlp.max_epochs",
    "mlp.cost_threshold",
    "mlp.lr",
    "mlp.batch",
    "train_fraction",
    "k_folds",
    "positive_threshold",
    "labels.neutral_from",
    "labels.trustworthy_from",
    "weights",
];

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| anyhow!("`{key}`: cannot parse `{value}`: {e}"))
}

/// `auto` (or `none`) clears an optional value.
fn optional<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match value {
        "auto" | "none" => Ok(None),
        v => num(key, v).map(Some),
    }
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value.split(',').map(|v| num(key, v.trim())).collect()
}

fn show_opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "auto".to_string(), T::to_string)
}

fn show_list<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Applies one setting. `base` resolves relative paths.
    pub fn set(&mut self, key: &str, value: &str, base: Option<&Path>) -> Result<()> {
        let value = value.trim();
        let path = |v: &str| match base {
            Some(b) if Path::new(v).is_relative() => b.join(v),
            _ => PathBuf::from(v),
        };
        let e = &mut self.experiment;
        match key {
            "seed" => e.seed = num(key, value)?,
            "dataset" => self.dataset = (value != "none").then(|| path(value)),
            "output" => self.output = path(value),
            "name" => self.name = (value != "auto").then(|| value.to_string()),
            "lambda" => e.lambda = num(key, value)?,
            "t0" => e.t0 = optional(key, value)?,
            "horizon" => e.horizon = optional(key, value)?,
            "now" => e.now = optional(key, value)?,
            "dtm_rule" => {
                e.dtm_rule = match value {
                    "laplace" => DtmRule::Laplace,
                    "ratio" => DtmRule::Ratio,
                    other => bail!("`dtm_rule` must be laplace or ratio, got `{other}`"),
                }
            }
            "epsilon" => e.epsilon = num(key, value)?,
            "max_iter" => e.max_iter = num(key, value)?,
            "th" => e.recommendation.threshold = num(key, value)?,
            "max_k" => e.recommendation.max_k = optional(key, value)?,
            "kge.dim" => e.kge.dim = num(key, value)?,
            "kge.epochs" => e.kge.epochs = num(key, value)?,
            "kge.batch" => e.kge.batch_size = num(key, value)?,
            "kge.lr" => e.kge.learning_rate = num(key, value)?,
            "kge.neg" => e.kge.neg_samples = num(key, value)?,
            "mlp.grid" => e.hidden_grid = list(key, value)?,
            "mlp.l2" => e.mlp.l2 = num(key, value)?,
            "mlp.max_epochs" => e.mlp.max_epochs = num(key, value)?,
            "mlp.cost_threshold" => e.mlp.cost_threshold = num(key, value)?,
            "mlp.lr" => e.mlp.learning_rate = num(key, value)?,
            "mlp.batch" => {
                e.mlp.batch_size = match value {
                    "full" => None,
                    v => Some(num(key, v)?),
                }
            }
            "train_fraction" => e.train_fraction = num(key, value)?,
            "k_folds" => e.k_folds = num(key, value)?,
            "positive_threshold" => e.positive_threshold = num(key, value)?,
            "labels.neutral_from" => e.labels.neutral_from = num(key, value)?,
            "labels.trustworthy_from" => e.labels.trustworthy_from = num(key, value)?,
            "weights" => {
                self.weights = match value {
                    "none" => None,
                    v => {
                        let w: Vec<f64> = list(key, v)?;
                        let w: [f64; N_FEATURES] = w
                            .try_into()
                            .map_err(|w: Vec<f64>| anyhow!("`weights` needs {N_FEATURES} values, got {}", w.len()))?;
                        Some(w)
                    }
                }
            }
            other => bail!("unknown configuration key `{other}`"),
        }
        Ok(())
    }

    /// Applies `key = value` lines. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str, base: Option<&Path>) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{origin}:{}: expected `key = value`", i + 1))?;
            self.set(k.trim(), v, base)
                .with_context(|| format!("{origin}:{}", i + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = read_text(path)?;
        self.apply_text(&text, &path.display().to_string(), path.parent())
    }

    /// Applies `TRUSTSIOT_*` variables from `vars`.
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<()> {
        let mut overrides: Vec<(String, String, String)> = vars
            .into_iter()
            .filter_map(|(k, v)| {
                let key = k.strip_prefix(ENV_PREFIX)?.to_ascii_lowercase().replace("__", ".");
                Some((key, v, k))
            })
            .collect();
        // Environment order is unspecified; sort so the result is not.
        overrides.sort();
        for (key, value, var) in overrides {
            self.set(&key, &value, None)
                .with_context(|| format!("environment variable {var}"))?;
        }
        Ok(())
    }

    /// Applies `key=value` pairs given on the command line.
    pub fn apply_pairs<'a>(&mut self, pairs: impl IntoIterator<Item = &'a str>) -> Result<()> {
        for pair in pairs {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| anyhow!("override `{pair}` is not `key=value`"))?;
            self.set(k.trim(), v, None)
                .with_context(|| format!("override `{pair}`"))?;
        }
        Ok(())
    }

    /// Defaults overridden by the optional file, then by the environment
    /// and finally by the pairs.
    pub fn load<'a>(
        file: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
        pairs: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(f) = file {
            cfg.apply_file(f)?;
        }
        cfg.apply_env(env)?;
        cfg.apply_pairs(pairs)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The experiment settings with the run seed propagated to every stage.
    pub fn seeded(&self) -> ExperimentConfig {
        self.experiment.clone().seeded()
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        let unit_open = |v: f64| v > 0.0 && v < 1.0;
        ensure!(e.lambda > 0.0 && e.lambda.is_finite(), "`lambda` must be > 0");
        ensure!(
            e.horizon.is_none_or(|h| h > 0.0 && h.is_finite()),
            "`horizon` must be > 0"
        );
        ensure!(e.epsilon > 0.0, "`epsilon` must be > 0");
        ensure!(e.max_iter > 0, "`max_iter` must be positive");
        ensure!(
            (0.0..=1.0).contains(&e.recommendation.threshold),
            "`th` must lie in [0, 1]"
        );
        ensure!(e.recommendation.max_k != Some(0), "`max_k` must be positive");
        e.kge.validate().context("kge settings")?;
        ensure!(
            !e.hidden_grid.is_empty() && !e.hidden_grid.contains(&0),
            "`mlp.grid` needs positive sizes"
        );
        ensure!(e.mlp.l2 >= 0.0, "`mlp.l2` must be >= 0");
        ensure!(e.mlp.learning_rate > 0.0, "`mlp.lr` must be > 0");
        ensure!(e.mlp.batch_size != Some(0), "`mlp.batch` must be positive or `full`");
        ensure!(unit_open(e.train_fraction), "`train_fraction` must lie in (0, 1)");
        ensure!(e.k_folds >= 2, "`k_folds` must be at least 2");
        ensure!(
            (0.0..=1.0).contains(&e.positive_threshold),
            "`positive_threshold` must lie in [0, 1]"
        );
        let l = &e.labels;
        ensure!(
            0.0 < l.neutral_from && l.neutral_from <= l.trustworthy_from && l.trustworthy_from <= 1.0,
            "label cut points must satisfy 0 < neutral_from <= trustworthy_from <= 1"
        );
        if let Some(w) = &self.weights {
            let sum: f64 = w.iter().sum();
            ensure!(
                w.iter().all(|&x| x >= 0.0) && (sum - 1.0).abs() <= 1e-9,
                "`weights` must be non-negative and sum to 1"
            );
        }
        Ok(())
    }

    /// Every key with its current value, in [`KEYS`] order. Feeding the
    /// pairs back through [`RunConfig::set`] reproduces the configuration.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let e = &self.experiment;
        KEYS.iter()
            .map(|&k| {
                let v = match k {
                    "seed" => e.seed.to_string(),
                    "dataset" => self.dataset.as_ref().map_or("none".into(), |p| p.display().to_string()),
                    "output" => self.output.display().to_string(),
                    "name" => self.name.clone().unwrap_or_else(|| "auto".into()),
                    "lambda" => e.lambda.to_string(),
                    "t0" => show_opt(&e.t0),
                    "horizon" => show_opt(&e.horizon),
                    "now" => show_opt(&e.now),
                    "dtm_rule" => match e.dtm_rule {
                        DtmRule::Laplace => "laplace".into(),
                        DtmRule::Ratio => "ratio".into(),
                    },
                    "epsilon" => e.epsilon.to_string(),
                    "max_iter" => e.max_iter.to_string(),
                    "th" => e.recommendation.threshold.to_string(),
                    "max_k" => show_opt(&e.recommendation.max_k),
                    "kge.dim" => e.kge.dim.to_string(),
                    "kge.epochs" => e.kge.epochs.to_string(),
                    "kge.batch" => e.kge.batch_size.to_string(),
                    "kge.lr" => e.kge.learning_rate.to_string(),
                    "kge.neg" => e.kge.neg_samples.to_string(),
                    "mlp.grid" => show_list(&e.hidden_grid),
                    "mlp.l2" => e.mlp.l2.to_string(),
                    "mlp.max_epochs" => e.mlp.max_epochs.to_string(),
                    "mlp.cost_threshold" => e.mlp.cost_threshold.to_string(),
                    "mlp.lr" => e.mlp.learning_rate.to_string(),
                    "mlp.batch" => e.mlp.batch_size.map_or("full".into(), |b| b.to_string()),
                    "train_fraction" => e.train_fraction.to_string(),
                    "k_folds" => e.k_folds.to_string(),
                    "positive_threshold" => e.positive_threshold.to_string(),
                    "labels.neutral_from" => e.labels.neutral_from.to_string(),
                    "labels.trustworthy_from" => e.labels.trustworthy_from.to_string(),
                    "weights" => self.weights.map_or("none".into(), |w| show_list(&w)),
                    _ => unreachable!("every key in KEYS has a rendering"),
                };
                (k, v)
            })
            .collect()
    }

    pub fn render(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}
