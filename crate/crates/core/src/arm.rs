//! Fixed-timestep model of one servo joint sweeping inside a walled workspace.
//!
//! The joint follows the joystick at `axis * max_speed_deg_s`. Two walls sit at
//! `center_deg ± wall_halfwidth_deg`. Pushing past a wall flexes the limb: the
//! measured angle keeps moving at half the commanded rate (in either direction)
//! until the penetration saturates at `max_flex_deg`.
//!
//! Load model (units of the servo's 0..=1024 load register):
//!
//! * free space: one Gaussian noise draw, `N(free_noise_mean, free_noise_std)`;
//! * while penetrating: `spring_load_per_deg * penetration + noise`;
//! * on the tick that first touches a wall, an extra impact transient of
//!   `impact_load_per_deg_s * |commanded speed|`.
//!
//! The sum is rounded and clamped into `0..=1024`. Noise comes from a
//! `ChaCha8Rng` seeded with `rng_seed`, so runs are reproducible across
//! platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Full scale of the load register.
pub const LOAD_MAX: u16 = 1024;

/// Measured angle moves at this fraction of the commanded rate while in a wall.
const PENETRATION_RATE: f64 = 0.5;

const SNAP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt_ms: f64,
    pub max_speed_deg_s: f64,
    pub range_deg: f64,
    pub center_deg: f64,
    pub wall_halfwidth_deg: f64,
    pub max_flex_deg: f64,
    pub spring_load_per_deg: f64,
    pub impact_load_per_deg_s: f64,
    pub free_noise_mean: f64,
    pub free_noise_std: f64,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        crate::config::defaults().sim.clone()
    }
}

fn require(ok: bool, field: &str, reason: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(field, reason))
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64| v.is_finite();
        require(finite(self.dt_ms) && self.dt_ms > 0.0, "dt_ms", "must be > 0")?;
        require(
            finite(self.max_speed_deg_s) && self.max_speed_deg_s > 0.0,
            "max_speed_deg_s",
            "must be > 0",
        )?;
        require(finite(self.range_deg) && self.range_deg > 0.0, "range_deg", "must be > 0")?;
        require(
            finite(self.wall_halfwidth_deg)
                && self.wall_halfwidth_deg > 0.0
                && self.wall_halfwidth_deg < self.range_deg / 2.0,
            "wall_halfwidth_deg",
            "must lie in (0, range_deg / 2)",
        )?;
        require(
            finite(self.center_deg)
                && self.center_deg - self.wall_halfwidth_deg >= 0.0
                && self.center_deg + self.wall_halfwidth_deg <= self.range_deg,
            "center_deg",
            "walls must lie inside [0, range_deg]",
        )?;
        require(
            finite(self.max_flex_deg) && self.max_flex_deg > 0.0,
            "max_flex_deg",
            "must be > 0",
        )?;
        require(
            finite(self.spring_load_per_deg) && self.spring_load_per_deg >= 0.0,
            "spring_load_per_deg",
            "must be >= 0",
        )?;
        require(
            self.spring_load_per_deg * self.max_flex_deg >= LOAD_MAX as f64,
            "spring_load_per_deg",
            "spring_load_per_deg * max_flex_deg must reach the 1024 load scale",
        )?;
        require(
            finite(self.impact_load_per_deg_s) && self.impact_load_per_deg_s >= 0.0,
            "impact_load_per_deg_s",
            "must be >= 0",
        )?;
        require(finite(self.free_noise_mean), "free_noise_mean", "must be finite")?;
        require(
            finite(self.free_noise_std) && self.free_noise_std >= 0.0,
            "free_noise_std",
            "must be >= 0",
        )?;
        Ok(())
    }

    /// `(left, right)` wall angles in degrees.
    pub fn wall_angles(&self) -> (f64, f64) {
        (
            self.center_deg - self.wall_halfwidth_deg,
            self.center_deg + self.wall_halfwidth_deg,
        )
    }

    pub fn dt_s(&self) -> f64 {
        self.dt_ms / 1000.0
    }
}

/// One servo reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServoState {
    pub t: u64,
    pub angle_deg: f64,
    pub velocity_deg_s: f64,
    pub load: u16,
    pub in_contact: bool,
    pub penetration_deg: f64,
}

/// Joystick deflection, negative toward the left wall.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JoystickCommand {
    axis: f64,
}

impl JoystickCommand {
    /// Clamps into `[-1, 1]`; NaN maps to zero.
    pub fn new(axis: f64) -> Self {
        let axis = if axis.is_nan() { 0.0 } else { axis.clamp(-1.0, 1.0) };
        JoystickCommand { axis }
    }

    pub fn axis(self) -> f64 {
        self.axis
    }
}

#[derive(Debug, Clone)]
pub struct ArmSim {
    config: SimConfig,
    rng: ChaCha8Rng,
    state: ServoState,
}

impl ArmSim {
    /// Seed the noise generator and center the joint.
    pub fn reset(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let mut sim = ArmSim {
            state: ServoState {
                t: 0,
                angle_deg: config.center_deg,
                velocity_deg_s: 0.0,
                load: 0,
                in_contact: false,
                penetration_deg: 0.0,
            },
            config,
            rng,
        };
        let n = sim.noise();
        sim.state.load = sim.quantise(n);
        Ok(sim)
    }

    pub fn state(&self) -> &ServoState {
        &self.state
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn wall_angles(&self) -> (f64, f64) {
        self.config.wall_angles()
    }

    fn noise(&mut self) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        self.config.free_noise_mean + self.config.free_noise_std * z
    }

    fn quantise(&self, load: f64) -> u16 {
        load.round().clamp(0.0, LOAD_MAX as f64) as u16
    }

    /// Advance one tick.
    pub fn step(&mut self, cmd: JoystickCommand) -> &ServoState {
        let cfg = &self.config;
        let dt = cfg.dt_s();
        let (left, right) = cfg.wall_angles();
        let travel = cmd.axis() * cfg.max_speed_deg_s * dt;
        let prev_angle = self.state.angle_deg;
        let mut angle = prev_angle;
        let mut pen = self.state.penetration_deg;
        let mut impact = 0.0;

        if pen > 0.0 {
            // side of the wall we are pressed into
            let side = if angle > cfg.center_deg { 1.0 } else { -1.0 };
            let wall = if side > 0.0 { right } else { left };
            if travel * side > 0.0 {
                pen = (pen + PENETRATION_RATE * travel.abs()).min(cfg.max_flex_deg);
                angle = wall + side * pen;
            } else if travel != 0.0 {
                let released = PENETRATION_RATE * travel.abs();
                if released + SNAP_EPS >= pen {
                    let free = travel.abs() - pen / PENETRATION_RATE;
                    pen = 0.0;
                    angle = wall - side * free.max(0.0);
                } else {
                    pen -= released;
                    angle = wall + side * pen;
                }
            }
        } else {
            let target = angle + travel;
            let crossed = if target > right {
                Some((1.0, right))
            } else if target < left {
                Some((-1.0, left))
            } else {
                None
            };
            match crossed {
                Some((side, wall)) => {
                    pen = (PENETRATION_RATE * (target - wall).abs()).min(cfg.max_flex_deg);
                    angle = wall + side * pen;
                    impact = cfg.impact_load_per_deg_s * (travel.abs() / dt);
                }
                None => angle = target,
            }
        }

        angle = angle.clamp(0.0, cfg.range_deg);
        let spring = if pen > 0.0 { cfg.spring_load_per_deg * pen } else { 0.0 };
        let raw = spring + impact + self.noise();

        self.state = ServoState {
            t: self.state.t + 1,
            angle_deg: angle,
            velocity_deg_s: (angle - prev_angle) / dt,
            load: self.quantise(raw),
            in_contact: pen > 0.0,
            penetration_deg: pen,
        };
        &self.state
    }
}
