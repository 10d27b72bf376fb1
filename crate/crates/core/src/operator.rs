//! Scripted operators standing in for human subjects.
//!
//! In the training task the operator can see the arm. It drives into a wall at
//! full deflection, keeps pressing for a short hold after the training buzz,
//! backs off to the center, pauses, and repeats on the other side.
//!
//! In the three test tasks the operator is blindfolded. It only knows the
//! tactor state and its own commands. It sweeps toward the wall it is aiming
//! for and turns around:
//!
//! * with feedback, `reaction_latency_ms` after a buzz starts;
//! * without feedback, when its dead-reckoned position estimate reaches the
//!   wall it believes is there. The estimate integrates the issued commands
//!   plus Gaussian noise and a constant per-trial drift, which reproduces
//!   one-sided control drift.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::arm::{JoystickCommand, SimConfig};
use crate::feedback::FeedbackMode;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserModelConfig {
    pub reaction_latency_ms: f64,
    pub approach_speed: f64,
    pub center_pause_ms: f64,
    /// How long the training operator keeps pressing after the first buzz of a wall visit.
    pub training_press_hold_ms: f64,
    /// Fixed drift in deg/tick. When absent, one is drawn per trial with a
    /// random sign and magnitude in `[drift_bias_min, drift_bias_max]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift_bias: Option<f64>,
    pub drift_bias_min: f64,
    pub drift_bias_max: f64,
    pub estimate_noise_std: f64,
    pub rng_seed: u64,
}

impl Default for UserModelConfig {
    fn default() -> Self {
        crate::config::defaults().user.clone()
    }
}

impl UserModelConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !nonneg(self.reaction_latency_ms) {
            return Err(Error::config("reaction_latency_ms", "must be >= 0"));
        }
        if !(self.approach_speed > 0.0 && self.approach_speed <= 1.0) {
            return Err(Error::config("approach_speed", "must lie in (0, 1]"));
        }
        if !(nonneg(self.center_pause_ms) && self.center_pause_ms <= 1000.0) {
            return Err(Error::config("center_pause_ms", "must lie in [0, 1000]"));
        }
        if !nonneg(self.training_press_hold_ms) {
            return Err(Error::config("training_press_hold_ms", "must be >= 0"));
        }
        if !(nonneg(self.drift_bias_min) && self.drift_bias_min <= self.drift_bias_max)
            || !self.drift_bias_max.is_finite()
        {
            return Err(Error::config("drift_bias_min", "need 0 <= min <= max"));
        }
        if let Some(b) = self.drift_bias {
            if !b.is_finite() {
                return Err(Error::config("drift_bias", "must be finite"));
            }
        }
        if !nonneg(self.estimate_noise_std) {
            return Err(Error::config("estimate_noise_std", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    ApproachLeft,
    ApproachRight,
    Pressing,
    Retreating,
    Pausing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }

    fn flip(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    fn approach(self) -> Phase {
        match self {
            Side::Left => Phase::ApproachLeft,
            Side::Right => Phase::ApproachRight,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorState {
    pub phase: Phase,
    pub internal_estimate_deg: f64,
    pub tactor_seen_at: Option<u64>,
}

/// What the operator perceives on one tick. `angle_deg` is only provided when
/// the operator can see the arm (the training task).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Observation {
    pub tactor: bool,
    pub angle_deg: Option<f64>,
}

/// Workspace facts the operator knows in advance.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Geometry {
    center_deg: f64,
    left_wall: f64,
    right_wall: f64,
    deg_per_tick: f64,
    dt_ms: f64,
}

#[derive(Debug, Clone)]
pub struct ScriptedOperator {
    task: FeedbackMode,
    geometry: Geometry,
    approach_speed: f64,
    latency_ticks: u64,
    hold_ticks: u64,
    pause_ticks: u64,
    noise_std: f64,
    drift_bias: f64,
    rng: ChaCha8Rng,

    state: OperatorState,
    target: Side,
    tick: u64,
    prev_tactor: bool,
    reversal_due: Option<u64>,
    pause_left: u64,
    last_angle: Option<f64>,
    last_axis: f64,
}

fn ms_to_ticks(ms: f64, dt_ms: f64) -> u64 {
    (ms / dt_ms).round() as u64
}

impl ScriptedOperator {
    /// Start at the workspace center. The first target wall alternates with the
    /// parity of `config.rng_seed`.
    pub fn reset(config: &UserModelConfig, task: FeedbackMode, sim: &SimConfig) -> Result<Self> {
        config.validate()?;
        let (left_wall, right_wall) = sim.wall_angles();
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let magnitude = rng.random_range(config.drift_bias_min..=config.drift_bias_max);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let drift_bias = config.drift_bias.unwrap_or(sign * magnitude);
        let target = if config.rng_seed.is_multiple_of(2) {
            Side::Left
        } else {
            Side::Right
        };
        Ok(ScriptedOperator {
            task,
            geometry: Geometry {
                center_deg: sim.center_deg,
                left_wall,
                right_wall,
                deg_per_tick: sim.max_speed_deg_s * sim.dt_s(),
                dt_ms: sim.dt_ms,
            },
            approach_speed: config.approach_speed,
            latency_ticks: ms_to_ticks(config.reaction_latency_ms, sim.dt_ms),
            hold_ticks: ms_to_ticks(config.training_press_hold_ms, sim.dt_ms),
            pause_ticks: ms_to_ticks(config.center_pause_ms, sim.dt_ms),
            noise_std: config.estimate_noise_std,
            drift_bias,
            rng,
            state: OperatorState {
                phase: target.approach(),
                internal_estimate_deg: sim.center_deg,
                tactor_seen_at: None,
            },
            target,
            tick: 0,
            prev_tactor: false,
            reversal_due: None,
            pause_left: 0,
            last_angle: None,
            last_axis: 0.0,
        })
    }

    pub fn state(&self) -> &OperatorState {
        &self.state
    }

    pub fn task(&self) -> FeedbackMode {
        self.task
    }

    pub fn drift_bias(&self) -> f64 {
        self.drift_bias
    }

    pub fn latency_ticks(&self) -> u64 {
        self.latency_ticks
    }

    pub fn step(&mut self, obs: Observation) -> JoystickCommand {
        let t = self.tick;
        self.tick += 1;
        let onset = obs.tactor && !self.prev_tactor;
        self.prev_tactor = obs.tactor;

        let axis = match self.task {
            FeedbackMode::Training => self.training_axis(obs, t),
            _ => self.test_axis(onset, t),
        };

        match (self.task, obs.angle_deg) {
            (FeedbackMode::Training, Some(angle)) => self.state.internal_estimate_deg = angle,
            _ => {
                let mut est = self.state.internal_estimate_deg + axis * self.geometry.deg_per_tick;
                if self.noise_std > 0.0 {
                    let z: f64 = self.rng.sample(StandardNormal);
                    est += self.noise_std * z;
                }
                if self.task == FeedbackMode::NoFeedback {
                    est += self.drift_bias;
                }
                self.state.internal_estimate_deg = est;
            }
        }
        self.last_angle = obs.angle_deg;
        self.last_axis = axis;
        JoystickCommand::new(axis)
    }

    fn training_axis(&mut self, obs: Observation, t: u64) -> f64 {
        let stalled = self.last_axis != 0.0
            && matches!(
                (self.last_angle, obs.angle_deg),
                (Some(a), Some(b)) if (a - b).abs() < 1e-9
            );

        if matches!(self.state.phase, Phase::ApproachLeft | Phase::ApproachRight) {
            if obs.tactor {
                self.state.phase = Phase::Pressing;
                self.state.tactor_seen_at = Some(t);
            } else if stalled {
                // pinned at full flex without a buzz
                self.state.phase = Phase::Retreating;
            }
        }
        if self.state.phase == Phase::Pressing {
            let seen = self.state.tactor_seen_at.unwrap_or(t);
            if t - seen >= self.hold_ticks || stalled {
                self.state.phase = Phase::Retreating;
                self.state.tactor_seen_at = None;
            }
        }
        if self.state.phase == Phase::Retreating {
            let angle = obs.angle_deg.unwrap_or(self.state.internal_estimate_deg);
            if (angle - self.geometry.center_deg) * self.target.sign() <= 0.0 {
                self.state.phase = Phase::Pausing;
                self.pause_left = self.pause_ticks;
                self.target = self.target.flip();
            }
        }
        if self.state.phase == Phase::Pausing {
            if self.pause_left == 0 {
                self.state.phase = self.target.approach();
            } else {
                self.pause_left -= 1;
            }
        }

        match self.state.phase {
            Phase::ApproachLeft | Phase::ApproachRight | Phase::Pressing => self.target.sign(),
            Phase::Retreating => -self.target.sign(),
            Phase::Pausing => 0.0,
        }
    }

    fn test_axis(&mut self, onset: bool, t: u64) -> f64 {
        match self.task {
            FeedbackMode::Reactive | FeedbackMode::Predictive => {
                if onset && self.reversal_due.is_none() {
                    self.reversal_due = Some(t + self.latency_ticks);
                    self.state.tactor_seen_at = Some(t);
                }
                if matches!(self.reversal_due, Some(due) if t >= due) {
                    self.reverse();
                }
            }
            _ => {
                let wall = match self.target {
                    Side::Left => self.geometry.left_wall,
                    Side::Right => self.geometry.right_wall,
                };
                if (self.state.internal_estimate_deg - wall) * self.target.sign() >= 0.0 {
                    self.reverse();
                }
            }
        }
        self.target.sign() * self.approach_speed
    }

    fn reverse(&mut self) {
        self.target = self.target.flip();
        self.state.phase = self.target.approach();
        self.reversal_due = None;
        self.state.tactor_seen_at = None;
    }

    /// Milliseconds per tick, as configured by the simulator.
    pub fn dt_ms(&self) -> f64 {
        self.geometry.dt_ms
    }
}
