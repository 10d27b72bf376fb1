//! Sparse binary state encoding.
//!
//! The servo range is cut into `num_bins` equal position bins and each bin is
//! split three ways by motion direction, giving `3 * num_bins` state units.
//! One extra baseline unit (the last index) is always on, so every vector has
//! exactly two active units.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodecConfig {
    pub num_bins: usize,
    pub range_deg: f64,
    pub velocity_epsilon_deg_s: f64,
}

impl Default for CodecConfig {
    fn default() -> Self {
        crate::config::defaults().codec.clone()
    }
}

impl CodecConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_bins == 0 {
            return Err(Error::config("num_bins", "must be >= 1"));
        }
        if !(self.range_deg.is_finite() && self.range_deg > 0.0) {
            return Err(Error::config("range_deg", "must be > 0"));
        }
        if !(self.velocity_epsilon_deg_s.is_finite() && self.velocity_epsilon_deg_s >= 0.0) {
            return Err(Error::config("velocity_epsilon_deg_s", "must be >= 0"));
        }
        Ok(())
    }

    /// State units plus the baseline unit.
    pub fn feature_length(&self) -> usize {
        self.num_bins * 3 + 1
    }

    pub fn bin_width(&self) -> f64 {
        self.range_deg / self.num_bins as f64
    }

    /// Lower edge of `bin`.
    pub fn bin_start(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_width()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Still = 0,
    Negative = 1,
    Positive = 2,
}

impl Direction {
    pub fn of(velocity_deg_s: f64, epsilon: f64) -> Self {
        if velocity_deg_s.abs() <= epsilon {
            Direction::Still
        } else if velocity_deg_s < 0.0 {
            Direction::Negative
        } else {
            Direction::Positive
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureVector {
    length: usize,
    active: [usize; 2],
}

impl FeatureVector {
    /// Build from a state-unit index; the baseline unit is added automatically.
    pub fn from_state_index(state_index: usize, length: usize) -> Result<Self> {
        if length < 2 || state_index >= length - 1 {
            return Err(Error::Domain(format!(
                "state index {state_index} out of range for length {length}"
            )));
        }
        Ok(FeatureVector {
            length,
            active: [state_index, length - 1],
        })
    }

    pub fn len(&self) -> usize {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `[state unit, baseline unit]`
    pub fn active_indices(&self) -> &[usize; 2] {
        &self.active
    }

    pub fn state_index(&self) -> usize {
        self.active[0]
    }

    pub fn baseline_index(&self) -> usize {
        self.active[1]
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.length];
        for &i in &self.active {
            x[i] = 1.0;
        }
        x
    }
}

/// Position bin of `angle_deg`. Bin edges belong to the upper bin; the top of
/// the range clamps into the last bin.
pub fn bin_of(angle_deg: f64, config: &CodecConfig) -> Result<usize> {
    if !(angle_deg.is_finite() && (0.0..=config.range_deg).contains(&angle_deg)) {
        return Err(Error::Domain(format!(
            "angle {angle_deg} outside [0, {}]",
            config.range_deg
        )));
    }
    let last = config.num_bins - 1;
    let mut bin = ((angle_deg / config.bin_width()).floor() as usize).min(last);
    // Keep floor() consistent with the edges as `bin_start` computes them.
    if bin < last && angle_deg >= config.bin_start(bin + 1) {
        bin += 1;
    } else if bin > 0 && angle_deg < config.bin_start(bin) {
        bin -= 1;
    }
    Ok(bin)
}

pub fn encode(angle_deg: f64, velocity_deg_s: f64, config: &CodecConfig) -> Result<FeatureVector> {
    if velocity_deg_s.is_nan() {
        return Err(Error::Domain("velocity is NaN".into()));
    }
    let bin = bin_of(angle_deg, config)?;
    let dir = Direction::of(velocity_deg_s, config.velocity_epsilon_deg_s);
    FeatureVector::from_state_index(bin * 3 + dir as usize, config.feature_length())
}
