//! Single-trial runner.
//!
//! Every tick runs, in order: sense, encode, predict, decide feedback,
//! operator step, log, sim step, and then (only when the learner is live) a
//! TD update with the load measured after the step.

use std::path::PathBuf;

use crate::arm::{ArmSim, JoystickCommand, ServoState};
use crate::config::{ExperimentConfig, FeedbackConfig, LearnerConfig};
use crate::features::{encode, CodecConfig, FeatureVector};
use crate::feedback::{decide, FeedbackDecision, FeedbackMode, FeedbackThresholds, TactorLatch};
use crate::gvf::{GvfLearner, WeightSnapshot};
use crate::log::{LogHeader, TrialLog, TrialStepRecord, LOG_SCHEMA_VERSION};
use crate::metrics::{compute_metrics, TrialMetrics};
use crate::operator::{Observation, ScriptedOperator, UserModelConfig};
use crate::seed::derive_seed;
use crate::{Error, Result, SimConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum LearnerSource {
    FreshLearning,
    FromSnapshot(PathBuf),
    None,
}

#[derive(Debug, Clone)]
pub struct TrialConfig {
    pub task: FeedbackMode,
    pub duration_ticks: u64,
    pub sim: SimConfig,
    pub codec: CodecConfig,
    pub learner: LearnerConfig,
    pub thresholds: FeedbackThresholds,
    pub feedback: FeedbackConfig,
    pub user: UserModelConfig,
    pub learner_source: LearnerSource,
    pub seed: u64,
}

impl TrialConfig {
    pub fn from_experiment(
        config: &ExperimentConfig,
        task: FeedbackMode,
        learner_source: LearnerSource,
        seed: u64,
    ) -> Self {
        TrialConfig {
            task,
            duration_ticks: config.trial.duration_ticks,
            sim: config.sim.clone(),
            codec: config.codec.clone(),
            learner: config.learner.clone(),
            thresholds: config.thresholds.clone(),
            feedback: config.feedback.clone(),
            user: config.user.clone(),
            learner_source,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.codec.validate()?;
        self.thresholds.validate()?;
        self.user.validate()?;
        GvfLearner::check_hyperparameters(self.learner.alpha, self.learner.gamma)?;
        if !(self.feedback.min_on_ms >= 0.0 && self.feedback.min_on_ms.is_finite()) {
            return Err(Error::config("feedback.min_on_ms", "must be finite and >= 0"));
        }
        if self.codec.range_deg != self.sim.range_deg {
            return Err(Error::config("codec.range_deg", "must equal sim.range_deg"));
        }
        match (self.task, &self.learner_source) {
            (FeedbackMode::Training, LearnerSource::FreshLearning) => {}
            (FeedbackMode::Training, _) => {
                return Err(Error::config(
                    "learner_source",
                    "training trials must start from a fresh learner",
                ))
            }
            (_, LearnerSource::FreshLearning) => {
                return Err(Error::config(
                    "learner_source",
                    "test trials use a trained snapshot",
                ))
            }
            (FeedbackMode::Predictive, LearnerSource::None) => {
                return Err(Error::NoSnapshot(
                    "predictive trials need a trained snapshot".into(),
                ))
            }
            _ => {}
        }
        Ok(())
    }

    /// Sim and operator seeds actually used by the trial.
    pub fn derived_seeds(&self) -> (u64, u64) {
        (derive_seed(self.seed, 1), derive_seed(self.seed, 2))
    }
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub log: TrialLog,
    pub metrics: TrialMetrics,
    /// Post-trial learner state for training (always frozen) and for
    /// trials run with online learning.
    pub snapshot: Option<WeightSnapshot>,
}

/// Run one trial, loading the snapshot from disk if the config names one.
pub fn run_trial(config: &TrialConfig) -> Result<TrialOutcome> {
    config.validate()?;
    let learner = match &config.learner_source {
        LearnerSource::FreshLearning => Some(GvfLearner::new(
            config.codec.feature_length(),
            config.learner.alpha,
            config.learner.gamma,
        )?),
        LearnerSource::FromSnapshot(path) => {
            let snap = WeightSnapshot::load(path)?;
            Some(GvfLearner::restore(&snap)?)
        }
        LearnerSource::None => None,
    };
    run_with_learner(config, learner)
}

/// Run one trial with an in-memory learner. `learner_source` only decides
/// whether the learner trains; the weights come from `learner`.
pub fn run_with_learner(config: &TrialConfig, learner: Option<GvfLearner>) -> Result<TrialOutcome> {
    run_with_hook(config, learner, |_| {})
}

/// Like [`run_with_learner`], calling `hook` after every logged tick.
pub fn run_with_hook(
    config: &TrialConfig,
    learner: Option<GvfLearner>,
    mut hook: impl FnMut(&TrialStepRecord),
) -> Result<TrialOutcome> {
    config.validate()?;
    if config.task == FeedbackMode::Predictive && learner.is_none() {
        return Err(Error::NoSnapshot(
            "predictive trials need a trained snapshot".into(),
        ));
    }
    let learning = match config.learner_source {
        LearnerSource::FreshLearning => true,
        _ => config.learner.online_learning,
    };
    let (sim_seed, user_seed) = config.derived_seeds();
    let sim = SimConfig {
        rng_seed: sim_seed,
        ..config.sim.clone()
    };
    let mut stepper = TrialStepper::new(StepperConfig {
        task: config.task,
        sim,
        codec: config.codec.clone(),
        thresholds: config.thresholds.clone(),
        min_on_ms: config.feedback.min_on_ms,
        learner,
        learning,
        seed: config.seed,
    })?;
    let mut operator = ScriptedOperator::reset(
        &UserModelConfig {
            rng_seed: user_seed,
            ..config.user.clone()
        },
        config.task,
        &config.sim,
    )?;
    let blind = config.task.is_blindfolded();
    stepper.reserve(config.duration_ticks as usize);
    for _ in 0..config.duration_ticks {
        let record = stepper.tick(|decision, state| {
            operator.step(Observation {
                tactor: decision.tactor_on,
                angle_deg: (!blind).then_some(state.angle_deg),
            })
        })?;
        hook(record);
    }
    let (log, learner) = stepper.finish();
    let metrics = compute_metrics(&log, &config.codec)?;
    let snapshot = if learning { learner.map(|l| l.snapshot()) } else { None };
    Ok(TrialOutcome {
        log,
        metrics,
        snapshot,
    })
}

#[derive(Debug, Clone)]
pub struct StepperConfig {
    pub task: FeedbackMode,
    /// Used as given, including `rng_seed`.
    pub sim: SimConfig,
    pub codec: CodecConfig,
    pub thresholds: FeedbackThresholds,
    pub min_on_ms: f64,
    pub learner: Option<GvfLearner>,
    /// Apply TD updates. Otherwise the learner is frozen for the whole trial.
    pub learning: bool,
    /// Recorded in the log header.
    pub seed: u64,
}

/// The per-tick pipeline shared by scripted trials and live sessions. The
/// joystick command comes from a callback so any driver can plug in.
#[derive(Debug)]
pub struct TrialStepper {
    task: FeedbackMode,
    sim: ArmSim,
    codec: CodecConfig,
    thresholds: FeedbackThresholds,
    latch: TactorLatch,
    learner: Option<GvfLearner>,
    learning: bool,
    state: ServoState,
    x: FeatureVector,
    log: TrialLog,
}

impl TrialStepper {
    pub fn new(config: StepperConfig) -> Result<Self> {
        config.codec.validate()?;
        config.thresholds.validate()?;
        if config.codec.range_deg != config.sim.range_deg {
            return Err(Error::config("codec.range_deg", "must equal sim.range_deg"));
        }
        let mut learner = config.learner;
        if let Some(l) = learner.as_mut() {
            if l.len() != config.codec.feature_length() {
                return Err(Error::config(
                    "snapshot",
                    format!(
                        "length {} does not match feature length {}",
                        l.len(),
                        config.codec.feature_length()
                    ),
                ));
            }
            if config.learning {
                l.unfreeze();
            } else {
                l.freeze();
            }
        }
        let sim = ArmSim::reset(config.sim.clone())?;
        let state = sim.state().clone();
        let x = encode(state.angle_deg, state.velocity_deg_s, &config.codec)?;
        let min_on_ticks = (config.min_on_ms / config.sim.dt_ms).round() as u32;
        Ok(TrialStepper {
            task: config.task,
            log: TrialLog::new(LogHeader {
                schema_version: LOG_SCHEMA_VERSION,
                task: config.task,
                seed: config.seed,
                dt_ms: config.sim.dt_ms,
                num_bins: config.codec.num_bins,
                range_deg: config.codec.range_deg,
            }),
            sim,
            codec: config.codec,
            thresholds: config.thresholds,
            latch: TactorLatch::new(min_on_ticks),
            learner,
            learning: config.learning,
            state,
            x,
        })
    }

    pub fn task(&self) -> FeedbackMode {
        self.task
    }

    pub fn state(&self) -> &ServoState {
        &self.state
    }

    pub fn log(&self) -> &TrialLog {
        &self.log
    }

    pub fn ticks(&self) -> u64 {
        self.log.records.len() as u64
    }

    fn reserve(&mut self, n: usize) {
        self.log.records.reserve(n);
    }

    /// Run one tick and return the record it logged.
    pub fn tick(
        &mut self,
        command: impl FnOnce(FeedbackDecision, &ServoState) -> JoystickCommand,
    ) -> Result<&TrialStepRecord> {
        let prediction = match &self.learner {
            Some(l) => l.predict(&self.x)?,
            None => 0.0,
        };
        let decision = self.latch.apply(decide(
            self.task,
            self.state.load,
            prediction,
            &self.thresholds,
        ));
        let cmd = command(decision, &self.state);
        self.log.records.push(TrialStepRecord {
            t: self.state.t,
            angle_deg: self.state.angle_deg,
            velocity_deg_s: self.state.velocity_deg_s,
            bin: self.x.state_index() / 3,
            load: self.state.load,
            prediction,
            tactor_on: decision.tactor_on,
            fired_rule: decision.fired_rule,
            joystick_axis: cmd.axis(),
            in_contact: self.state.in_contact,
        });

        self.state = self.sim.step(cmd).clone();
        let x_next = encode(self.state.angle_deg, self.state.velocity_deg_s, &self.codec)?;
        if self.learning {
            if let Some(l) = self.learner.as_mut() {
                l.update(&self.x, self.state.load as f64, &x_next)?;
            }
        }
        self.x = x_next;
        Ok(self.log.records.last().expect("just pushed"))
    }

    /// End the trial. A learner that was trained comes back frozen after a
    /// training task.
    pub fn finish(self) -> (TrialLog, Option<GvfLearner>) {
        let task = self.task;
        let learner = self.learner.map(|mut l| {
            if task == FeedbackMode::Training {
                l.freeze();
            }
            l
        });
        (self.log, learner)
    }
}
