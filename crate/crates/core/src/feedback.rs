//! Tactor decisions for the four task conditions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arm::LOAD_MAX;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackMode {
    Training,
    NoFeedback,
    Reactive,
    Predictive,
}

impl FeedbackMode {
    /// Protocol order.
    pub const ALL: [FeedbackMode; 4] = [
        FeedbackMode::Training,
        FeedbackMode::NoFeedback,
        FeedbackMode::Reactive,
        FeedbackMode::Predictive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackMode::Training => "training",
            FeedbackMode::NoFeedback => "no_feedback",
            FeedbackMode::Reactive => "reactive",
            FeedbackMode::Predictive => "predictive",
        }
    }

    /// Tasks 2-4 are run blindfolded.
    pub fn is_blindfolded(self) -> bool {
        self != FeedbackMode::Training
    }
}

impl fmt::Display for FeedbackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeedbackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeedbackMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::config("task", format!("unknown task `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiredRule {
    Training,
    Reactive,
    Predictive,
    None,
}

impl FiredRule {
    pub fn as_str(self) -> &'static str {
        match self {
            FiredRule::Training => "training",
            FiredRule::Reactive => "reactive",
            FiredRule::Predictive => "predictive",
            FiredRule::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackThresholds {
    pub training_load: f64,
    pub reactive_load: f64,
    pub predictive_value: f64,
}

impl Default for FeedbackThresholds {
    fn default() -> Self {
        crate::config::defaults().thresholds.clone()
    }
}

impl FeedbackThresholds {
    pub fn validate(&self) -> Result<()> {
        let max = LOAD_MAX as f64;
        if !(0.0..=max).contains(&self.training_load) {
            return Err(Error::config("training_load", "must lie in [0, 1024]"));
        }
        if !(0.0..=max).contains(&self.reactive_load) {
            return Err(Error::config("reactive_load", "must lie in [0, 1024]"));
        }
        if !(self.predictive_value >= 0.0 && self.predictive_value.is_finite()) {
            return Err(Error::config("predictive_value", "must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackDecision {
    pub tactor_on: bool,
    pub fired_rule: FiredRule,
}

impl FeedbackDecision {
    pub const OFF: FeedbackDecision = FeedbackDecision {
        tactor_on: false,
        fired_rule: FiredRule::None,
    };

    fn fire_if(cond: bool, rule: FiredRule) -> Self {
        if cond {
            FeedbackDecision {
                tactor_on: true,
                fired_rule: rule,
            }
        } else {
            Self::OFF
        }
    }
}

/// Threshold rule for the active task. All comparisons are strict.
pub fn decide(
    mode: FeedbackMode,
    load: u16,
    prediction: f64,
    thresholds: &FeedbackThresholds,
) -> FeedbackDecision {
    let load = load as f64;
    match mode {
        FeedbackMode::Training => {
            FeedbackDecision::fire_if(load > thresholds.training_load, FiredRule::Training)
        }
        FeedbackMode::Reactive => {
            FeedbackDecision::fire_if(load > thresholds.reactive_load, FiredRule::Reactive)
        }
        FeedbackMode::Predictive => FeedbackDecision::fire_if(
            prediction > thresholds.predictive_value,
            FiredRule::Predictive,
        ),
        FeedbackMode::NoFeedback => FeedbackDecision::OFF,
    }
}

/// Optional minimum-on duration layered over [`decide`]. With zero ticks it is
/// a pass-through.
#[derive(Debug, Clone)]
pub struct TactorLatch {
    min_on_ticks: u32,
    remaining: u32,
    rule: FiredRule,
}

impl TactorLatch {
    pub fn new(min_on_ticks: u32) -> Self {
        TactorLatch {
            min_on_ticks,
            remaining: 0,
            rule: FiredRule::None,
        }
    }

    pub fn apply(&mut self, decision: FeedbackDecision) -> FeedbackDecision {
        if decision.tactor_on {
            self.remaining = self.min_on_ticks.saturating_sub(1);
            self.rule = decision.fired_rule;
            decision
        } else if self.remaining > 0 {
            self.remaining -= 1;
            FeedbackDecision {
                tactor_on: true,
                fired_rule: self.rule,
            }
        } else {
            decision
        }
    }
}
