//! TD(0) general value function over sparse binary features.
//!
//! The learner predicts the discounted sum of future load,
//! `sum_k gamma^k * load_{t+k+1}`, as the inner product `w . x_t`. Each update
//! moves the active weights by `alpha * delta` where
//!
//! ```text
//! delta = load_{t+1} + gamma * (w . x_{t+1}) - w . x_t
//! ```
//!
//! and both inner products use the weights from before the update.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::features::FeatureVector;
use crate::{Error, Result};

pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateRecord {
    pub td_error: f64,
    pub prediction_before: f64,
    pub prediction_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GvfLearner {
    weights: Vec<f64>,
    alpha: f64,
    gamma: f64,
    frozen: bool,
    updates_applied: u64,
}

impl GvfLearner {
    pub fn new(length: usize, alpha: f64, gamma: f64) -> Result<Self> {
        if length == 0 {
            return Err(Error::config("length", "must be >= 1"));
        }
        Self::check_hyperparameters(alpha, gamma)?;
        Ok(GvfLearner {
            weights: vec![0.0; length],
            alpha,
            gamma,
            frozen: false,
            updates_applied: 0,
        })
    }

    pub fn check_hyperparameters(alpha: f64, gamma: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::config("alpha", format!("{alpha} not in [0, 1]")));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::config("gamma", format!("{gamma} not in [0, 1)")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn updates_applied(&self) -> u64 {
        self.updates_applied
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn unfreeze(&mut self) {
        self.frozen = false;
    }

    fn check_len(&self, x: &FeatureVector) -> Result<()> {
        if x.len() != self.weights.len() {
            return Err(Error::Domain(format!(
                "feature length {} does not match weight length {}",
                x.len(),
                self.weights.len()
            )));
        }
        Ok(())
    }

    fn dot(&self, x: &FeatureVector) -> f64 {
        x.active_indices().iter().map(|&i| self.weights[i]).sum()
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<f64> {
        self.check_len(x)?;
        Ok(self.dot(x))
    }

    /// One TD(0) step for the transition `x_t -> x_next` that observed `load_next`.
    /// A frozen learner reports the TD error but leaves the weights untouched.
    pub fn update(
        &mut self,
        x_t: &FeatureVector,
        load_next: f64,
        x_next: &FeatureVector,
    ) -> Result<UpdateRecord> {
        self.check_len(x_t)?;
        self.check_len(x_next)?;
        if !load_next.is_finite() {
            return Err(Error::Domain(format!("load {load_next} is not finite")));
        }
        let before = self.dot(x_t);
        let td_error = load_next + self.gamma * self.dot(x_next) - before;
        if !self.frozen {
            let step = self.alpha * td_error;
            for &i in x_t.active_indices() {
                self.weights[i] += step;
            }
        }
        self.updates_applied += 1;
        Ok(UpdateRecord {
            td_error,
            prediction_before: before,
            prediction_after: self.dot(x_t),
        })
    }

    pub fn snapshot(&self) -> WeightSnapshot {
        WeightSnapshot {
            format_version: SNAPSHOT_FORMAT_VERSION,
            alpha: self.alpha,
            gamma: self.gamma,
            frozen: self.frozen,
            updates_applied: self.updates_applied,
            length: self.weights.len(),
            weights: self.weights.clone(),
        }
    }

    pub fn restore(snapshot: &WeightSnapshot) -> Result<Self> {
        snapshot.validate()?;
        Ok(GvfLearner {
            weights: snapshot.weights.clone(),
            alpha: snapshot.alpha,
            gamma: snapshot.gamma,
            frozen: snapshot.frozen,
            updates_applied: snapshot.updates_applied,
        })
    }
}

/// Persisted learner state.
///
/// On disk this is a single JSON object:
///
/// ```json
/// {"format_version":1,"alpha":0.1,"gamma":0.92,"frozen":true,
///  "updates_applied":6000,"length":97,"weights":[...]}
/// ```
///
/// Floats use shortest round-trip formatting, so restore is bit-exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSnapshot {
    pub format_version: u32,
    pub alpha: f64,
    pub gamma: f64,
    pub frozen: bool,
    pub updates_applied: u64,
    pub length: usize,
    pub weights: Vec<f64>,
}

impl WeightSnapshot {
    pub fn validate(&self) -> Result<()> {
        let bad = |message: String| Error::Parse { line: 1, message };
        if self.format_version != SNAPSHOT_FORMAT_VERSION {
            return Err(bad(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        if self.length == 0 || self.weights.len() != self.length {
            return Err(bad(format!(
                "length {} but {} weights",
                self.length,
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(bad("non-finite weight".into()));
        }
        GvfLearner::check_hyperparameters(self.alpha, self.gamma)
            .map_err(|e| bad(e.to_string()))?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshot serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let snap: WeightSnapshot = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        snap.validate()?;
        Ok(snap)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NoSnapshot(path.display().to_string()),
            _ => Error::Io(e),
        })?;
        Self::from_json(&text)
    }
}
