//! `key = value` configuration with `#` comments. Flags override file values.

use std::fmt::Display;
use std::str::FromStr;

use maskfusion::estimator::{EstimatorConfig, TrainConfig};
use maskfusion::evalkit::{default_levels, Metric, SweepGrid, SynthConfig};
use maskfusion::masks::FusionParams;
use maskfusion::objectives::LossWeights;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// Drives corpus synthesis, weight initialisation and the shuffle order.
    pub seed: u64,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub duration_s: f64,
    pub snrs_db: Vec<f64>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_frames: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub context: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub select_on_dev: bool,
    pub delta: f64,
    pub gamma: f64,
    pub deltas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub metric: Metric,
    /// Delta held fixed in the scale table, gamma held fixed in the threshold table.
    pub table_delta: f64,
    pub table_gamma: f64,
}

impl Default for Config {
    fn default() -> Self {
        let synth = SynthConfig::default();
        let net = EstimatorConfig::default();
        let t = TrainConfig::default();
        Self {
            seed: 0,
            n_train: synth.n_train,
            n_dev: synth.n_dev,
            n_test: synth.n_test,
            duration_s: synth.duration_s,
            snrs_db: synth.snrs_db,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            batch_frames: t.batch_frames,
            alpha: t.alpha,
            lambda: 0.0,
            context: net.context,
            hidden1: net.hidden1,
            hidden2: net.hidden2,
            select_on_dev: t.select_on_dev,
            delta: 0.5,
            gamma: 0.5,
            deltas: default_levels(),
            gammas: default_levels(),
            metric: Metric::SiSdr,
            table_delta: 0.5,
            table_gamma: 0.5,
        }
    }
}

pub const KEYS: &[&str] = &[
    "seed",
    "n_train",
    "n_dev",
    "n_test",
    "duration_s",
    "snrs_db",
    "epochs",
    "learning_rate",
    "batch_frames",
    "alpha",
    "lambda",
    "context",
    "hidden1",
    "hidden2",
    "select_on_dev",
    "delta",
    "gamma",
    "deltas",
    "gammas",
    "metric",
    "table_delta",
    "table_gamma",
];

fn scalar<T: FromStr>(key: &str, value: &str) -> CliResult<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| CliError::usage(format!("{key}: cannot parse {value:?}: {e}")))
}

fn list(key: &str, value: &str) -> CliResult<Vec<f64>> {
    value
        .split(',')
        .map(|v| scalar::<f64>(key, v.trim()))
        .collect()
}

fn finite(key: &str, value: &str) -> CliResult<f64> {
    let v: f64 = scalar(key, value)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::usage(format!("{key} must be finite")))
    }
}

impl Config {
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let value = value.trim();
        match key {
            "seed" => self.seed = scalar(key, value)?,
            "n_train" => self.n_train = scalar(key, value)?,
            "n_dev" => self.n_dev = scalar(key, value)?,
            "n_test" => self.n_test = scalar(key, value)?,
            "duration_s" => self.duration_s = finite(key, value)?,
            "snrs_db" => self.snrs_db = list(key, value)?,
            "epochs" => self.epochs = scalar(key, value)?,
            "learning_rate" => self.learning_rate = finite(key, value)?,
            "batch_frames" => self.batch_frames = scalar(key, value)?,
            "alpha" => self.alpha = finite(key, value)?,
            "lambda" => self.lambda = finite(key, value)?,
            "context" => self.context = scalar(key, value)?,
            "hidden1" => self.hidden1 = scalar(key, value)?,
            "hidden2" => self.hidden2 = scalar(key, value)?,
            "select_on_dev" => self.select_on_dev = scalar(key, value)?,
            "delta" => self.delta = finite(key, value)?,
            "gamma" => self.gamma = finite(key, value)?,
            "deltas" => self.deltas = list(key, value)?,
            "gammas" => self.gammas = list(key, value)?,
            "metric" => self.metric = scalar(key, value)?,
            "table_delta" => self.table_delta = finite(key, value)?,
            "table_gamma" => self.table_gamma = finite(key, value)?,
            _ => {
                return Err(CliError::usage(format!(
                    "unknown config key {key:?}; known keys: {}",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies every line of a config file on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> CliResult<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::usage(format!("config line {}: expected `key = value`", i + 1))
            })?;
            self.set(key.trim(), value).map_err(|e| {
                CliError::usage(format!("config line {}: {}", i + 1, strip_usage(&e)))
            })?;
        }
        Ok(())
    }

    /// Applies `key=value` overrides from the command line.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> CliResult<()> {
        for o in overrides {
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("--set expects key=value, got {o:?}")))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            n_train: self.n_train,
            n_dev: self.n_dev,
            n_test: self.n_test,
            duration_s: self.duration_s,
            snrs_db: self.snrs_db.clone(),
        }
    }

    pub fn estimator_config(&self) -> CliResult<EstimatorConfig> {
        let cfg = EstimatorConfig {
            context: self.context,
            hidden1: self.hidden1,
            hidden2: self.hidden2,
            seed: self.seed,
            ..EstimatorConfig::default()
        };
        cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
        Ok(cfg)
    }

    pub fn train_config(&self) -> CliResult<TrainConfig> {
        // a nonzero consistency weight is unsupported
        LossWeights::new(self.alpha, self.lambda).map_err(|e| CliError::usage(e.to_string()))?;
        let t = TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_frames: self.batch_frames,
            alpha: self.alpha,
            seed: self.seed,
            select_on_dev: self.select_on_dev,
            ..TrainConfig::default()
        };
        t.validate().map_err(|e| CliError::usage(e.to_string()))?;
        Ok(t)
    }

    pub fn fusion(&self) -> CliResult<FusionParams> {
        FusionParams::new(self.delta, self.gamma).map_err(|e| CliError::usage(e.to_string()))
    }

    pub fn sweep_grid(&self) -> CliResult<SweepGrid> {
        let grid = SweepGrid {
            deltas: self.deltas.clone(),
            gammas: self.gammas.clone(),
            metric: self.metric,
        };
        grid.validate()
            .map_err(|e| CliError::usage(e.to_string()))?;
        Ok(grid)
    }
}

fn strip_usage(e: &CliError) -> String {
    match e {
        CliError::Usage(m) => m.clone(),
        other => other.to_string(),
    }
}
