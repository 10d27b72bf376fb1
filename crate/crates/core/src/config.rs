//! Experiment configuration.
//!
//! Every default lives in `config/default.toml` at the repository root, which is
//! embedded at build time. A run is configured by layering, lowest to highest
//! precedence: the embedded defaults, an optional user config file, then
//! `key=value` overrides addressed by dotted path (`sim.max_speed_deg_s=30`).

use std::path::Path;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::arm::SimConfig;
use crate::features::CodecConfig;
use crate::feedback::FeedbackThresholds;
use crate::gvf::GvfLearner;
use crate::operator::UserModelConfig;
use crate::{Error, Result};

pub const DEFAULT_CONFIG_TOML: &str =
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../config/default.toml"));

static DEFAULTS: LazyLock<ExperimentConfig> = LazyLock::new(|| {
    toml::from_str(DEFAULT_CONFIG_TOML).expect("embedded default config must parse")
});

/// Shared defaults parsed from the embedded config file.
pub fn defaults() -> &'static ExperimentConfig {
    &DEFAULTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub online_learning: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        defaults().learner.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackConfig {
    pub min_on_ms: f64,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        defaults().feedback.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialSettings {
    pub duration_ticks: u64,
}

impl Default for TrialSettings {
    fn default() -> Self {
        defaults().trial.clone()
    }
}

/// One document that drives a whole protocol run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sim: SimConfig,
    pub codec: CodecConfig,
    pub learner: LearnerConfig,
    pub thresholds: FeedbackThresholds,
    pub feedback: FeedbackConfig,
    pub user: UserModelConfig,
    pub trial: TrialSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        defaults().clone()
    }
}

impl ExperimentConfig {
    /// Build a config from the embedded defaults, an optional file and overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(DEFAULT_CONFIG_TOML)
            .map_err(|e| Error::config("<defaults>", e.to_string()))?;
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)?;
            let user: toml::Table = toml::from_str(&text)
                .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
            merge(&mut table, user);
        }
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let config: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config("config", e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.codec.validate()?;
        self.thresholds.validate()?;
        self.user.validate()?;
        GvfLearner::check_hyperparameters(self.learner.alpha, self.learner.gamma)?;
        if self.codec.range_deg != self.sim.range_deg {
            return Err(Error::config(
                "codec.range_deg",
                format!(
                    "must equal sim.range_deg ({} != {})",
                    self.codec.range_deg, self.sim.range_deg
                ),
            ));
        }
        if !(self.feedback.min_on_ms >= 0.0 && self.feedback.min_on_ms.is_finite()) {
            return Err(Error::config("feedback.min_on_ms", "must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(dst)), toml::Value::Table(src)) => merge(dst, src),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

/// Apply one `dotted.path=value` override. The value is read as a TOML literal,
/// falling back to a bare string.
pub fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (path, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::config(item, "override must look like key=value"))?;
    let path = path.trim();
    let raw = raw.trim();
    if path.is_empty() {
        return Err(Error::config(item, "empty key"));
    }
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    };

    let mut keys: Vec<&str> = path.split('.').collect();
    let last = keys.pop().expect("split yields at least one item");
    let mut cursor = table;
    for key in keys {
        cursor = match cursor
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
        {
            toml::Value::Table(t) => t,
            _ => return Err(Error::config(path, format!("`{key}` is not a section"))),
        };
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}
