use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::catalog::{Precision, ProjectionMode};
use crate::error::{Error, Result};
use crate::learner::{LearningRateSchedule, ScheduleKind, UpdateMode};
use crate::metrics::OracleOptions;
use crate::simulator::{DistributionShift, EpisodeConfig, Variant};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateModeName {
    #[default]
    Full,
    ChosenOnly,
    Batched,
}

/// A run described by a flat JSON object. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "I")]
    pub num_items: usize,
    #[serde(rename = "d")]
    pub dim: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "K", default = "one")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub update_mode: UpdateModeName,
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub schedule: ScheduleKind,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default)]
    pub projection: ProjectionMode,
    #[serde(default)]
    pub precision: Precision,
    #[serde(default = "one")]
    pub repeat_passes: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_sigma_init")]
    pub sigma_init: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub shift_round: Option<u64>,
    #[serde(default = "default_half")]
    pub shift_fraction: f64,
    #[serde(default = "default_hops")]
    pub hops: usize,
    #[serde(default = "default_half")]
    pub withheld_fraction: f64,
    #[serde(default)]
    pub insert_round: Option<u64>,
    #[serde(default)]
    pub propensity_floor: Option<f64>,
    #[serde(default = "default_oracle_passes")]
    pub oracle_passes: usize,
    #[serde(default = "default_oracle_lr")]
    pub oracle_lr: f64,
    /// Held-out probe queries for the `metrics` command.
    #[serde(default = "default_eval_queries")]
    pub eval_queries: usize,
    #[serde(default = "default_event_log")]
    pub event_log: PathBuf,
    #[serde(default = "default_snapshot")]
    pub snapshot: PathBuf,
    #[serde(default)]
    pub queries_path: Option<PathBuf>,
    #[serde(default)]
    pub items_path: Option<PathBuf>,
    #[serde(default)]
    pub labels_path: Option<PathBuf>,
}

fn one() -> usize {
    1
}
fn default_c() -> f64 {
    1e-5
}
fn default_sigma() -> f64 {
    0.3
}
fn default_sigma_init() -> f64 {
    0.8
}
fn default_alpha() -> f64 {
    1.0
}
fn default_half() -> f64 {
    0.5
}
fn default_hops() -> usize {
    2
}
fn default_oracle_passes() -> usize {
    10_000
}
fn default_oracle_lr() -> f64 {
    0.1
}
fn default_eval_queries() -> usize {
    1000
}
fn default_event_log() -> PathBuf {
    PathBuf::from("events.jsonl")
}
fn default_snapshot() -> PathBuf {
    PathBuf::from("final.orag")
}

impl RunConfig {
    /// Config with every default and the given required fields.
    pub fn new(num_items: usize, dim: usize, horizon: usize) -> Self {
        let json = format!(r#"{{"I":{num_items},"d":{dim},"T":{horizon}}}"#);
        serde_json::from_str(&json).expect("defaults deserialize")
    }

    pub fn update_mode(&self) -> UpdateMode {
        match self.update_mode {
            UpdateModeName::Full => UpdateMode::Full,
            UpdateModeName::ChosenOnly => UpdateMode::ChosenOnly,
            UpdateModeName::Batched => UpdateMode::Batched {
                batch_size: self.batch_size.unwrap_or(0),
            },
        }
    }

    pub fn episode(&self) -> EpisodeConfig {
        EpisodeConfig {
            horizon: self.horizon,
            num_items: self.num_items,
            dim: self.dim,
            k: self.k,
            variant: self.variant,
            update_mode: self.update_mode(),
            schedule: LearningRateSchedule {
                kind: self.schedule,
                c: self.c,
            },
            projection: self.projection,
            repeat_passes: self.repeat_passes,
            query_noise: self.sigma,
            init_noise: self.sigma_init,
            reranker_accuracy: self.alpha,
            shift: self.shift_round.map(|round| DistributionShift {
                round,
                fraction: self.shift_fraction,
            }),
            hops: self.hops,
            withheld_fraction: self.withheld_fraction,
            insert_round: self.insert_round,
            propensity_floor: self.propensity_floor,
        }
    }

    pub fn oracle_options(&self) -> OracleOptions {
        OracleOptions {
            passes: self.oracle_passes,
            learning_rate: self.oracle_lr,
            ..OracleOptions::default()
        }
    }

    /// Checks every constraint; the error names the offending key.
    pub fn validate(&self) -> Result<()> {
        if self.update_mode == UpdateModeName::Batched && self.batch_size.is_none() {
            return Err(Error::validation("batch_size", "required when update_mode is batched"));
        }
        if self.update_mode != UpdateModeName::Batched && self.batch_size.is_some() {
            return Err(Error::validation("batch_size", "only valid with update_mode batched"));
        }
        if let Some((field, msg)) = self.episode().check() {
            return Err(Error::validation(field, msg));
        }
        if !(self.shift_fraction.is_finite() && (0.0..=1.0).contains(&self.shift_fraction)) {
            return Err(Error::validation("shift_fraction", "must lie in [0, 1]"));
        }
        if self.oracle_passes < 1 {
            return Err(Error::validation("oracle_passes", "must be at least 1"));
        }
        if !(self.oracle_lr.is_finite() && self.oracle_lr > 0.0) {
            return Err(Error::validation("oracle_lr", "must be positive"));
        }
        if self.eval_queries < 1 {
            return Err(Error::validation("eval_queries", "must be at least 1"));
        }
        Ok(())
    }
}

/// Parses and validates a config from JSON text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        match inner.classify() {
            serde_json::error::Category::Data => {
                let message = inner.to_string();
                let field = if path == "." {
                    unknown_or_missing_field(&message).unwrap_or(path)
                } else {
                    path
                };
                Error::Validation { field, message }
            }
            _ => Error::Parse(inner.to_string()),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn unknown_or_missing_field(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(message[start..start + len].to_string())
}

/// Reads, parses and validates a config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}
