//! Authoritative session state. Everything here is synchronous; the network
//! layer feeds it events and ticks and forwards what comes back.

use std::collections::BTreeSet;
use std::path::PathBuf;

use foresight_core::harness::StepperConfig;
use foresight_core::{
    compute_metrics, derive_seed, ExperimentConfig, FeedbackMode, GvfLearner, JoystickCommand,
    TrialLog, TrialStepper, WeightSnapshot,
};

use crate::protocol::{parse_client, ClientMessage, ParseFailure, Role, ServerMessage, TaskLabel};
use crate::ServerError;

pub type ClientId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recipient {
    Client(ClientId),
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outbound {
    Send(Recipient, ServerMessage),
    /// Close this client's connection after flushing earlier frames.
    Close(ClientId),
}

impl Outbound {
    fn to(id: ClientId, m: ServerMessage) -> Self {
        Outbound::Send(Recipient::Client(id), m)
    }

    fn all(m: ServerMessage) -> Self {
        Outbound::Send(Recipient::All, m)
    }
}

pub struct Session {
    config: ExperimentConfig,
    out_dir: Option<PathBuf>,
    seed: u64,
    stepper: Option<TrialStepper>,
    snapshot: Option<WeightSnapshot>,
    pending: JoystickCommand,
    blindfold: bool,
    driver: Option<ClientId>,
    clients: BTreeSet<ClientId>,
    trials_started: u64,
    saved: Vec<PathBuf>,
}

impl Session {
    /// `out_dir`, when given, receives one log per finished task and the
    /// training snapshot.
    pub fn new(
        config: ExperimentConfig,
        out_dir: Option<PathBuf>,
        seed: u64,
    ) -> Result<Self, ServerError> {
        config.validate()?;
        if let Some(dir) = &out_dir {
            std::fs::create_dir_all(dir)?;
        }
        Ok(Session {
            config,
            out_dir,
            seed,
            stepper: None,
            snapshot: None,
            pending: JoystickCommand::new(0.0),
            blindfold: false,
            driver: None,
            clients: BTreeSet::new(),
            trials_started: 0,
            saved: Vec::new(),
        })
    }

    /// Start with an already trained snapshot, e.g. from an earlier session.
    pub fn with_snapshot(mut self, snapshot: WeightSnapshot) -> Result<Self, ServerError> {
        snapshot.validate()?;
        self.snapshot = Some(snapshot);
        Ok(self)
    }

    pub fn dt_ms(&self) -> f64 {
        self.config.sim.dt_ms
    }

    pub fn task(&self) -> Option<FeedbackMode> {
        self.stepper.as_ref().map(|s| s.task())
    }

    pub fn snapshot(&self) -> Option<&WeightSnapshot> {
        self.snapshot.as_ref()
    }

    pub fn pending_axis(&self) -> f64 {
        self.pending.axis()
    }

    pub fn blindfold(&self) -> bool {
        self.blindfold
    }

    pub fn driver(&self) -> Option<ClientId> {
        self.driver
    }

    /// Files written so far, in order.
    pub fn saved_files(&self) -> &[PathBuf] {
        &self.saved
    }

    pub fn current_log(&self) -> Option<&TrialLog> {
        self.stepper.as_ref().map(|s| s.log())
    }

    /// First client to arrive drives; everyone else observes.
    pub fn connect(&mut self, id: ClientId) -> Vec<Outbound> {
        self.clients.insert(id);
        let role = if self.driver.is_none() {
            self.driver = Some(id);
            Role::Driver
        } else {
            Role::Observer
        };
        vec![Outbound::to(id, ServerMessage::Role { role })]
    }

    /// When the driver leaves, the longest-connected observer takes over.
    pub fn disconnect(&mut self, id: ClientId) -> Vec<Outbound> {
        self.clients.remove(&id);
        if self.driver != Some(id) {
            return Vec::new();
        }
        self.driver = self.clients.iter().next().copied();
        match self.driver {
            Some(next) => vec![Outbound::to(next, ServerMessage::Role { role: Role::Driver })],
            None => Vec::new(),
        }
    }

    pub fn handle_text(&mut self, id: ClientId, text: &str) -> Vec<Outbound> {
        match parse_client(text) {
            Ok(msg) => self.handle_message(id, msg),
            Err(ParseFailure::UnknownType) => {
                vec![Outbound::to(id, ServerMessage::error("unknown_type"))]
            }
            Err(f @ ParseFailure::BadMessage) => {
                let mut out = vec![Outbound::to(id, ServerMessage::error(f.code())), Outbound::Close(id)];
                out.extend(self.disconnect(id));
                out
            }
        }
    }

    pub fn handle_message(&mut self, id: ClientId, msg: ClientMessage) -> Vec<Outbound> {
        if self.driver != Some(id) {
            return vec![Outbound::to(id, ServerMessage::error("not_driver"))];
        }
        match msg {
            ClientMessage::Joystick { axis } => {
                let cmd = JoystickCommand::new(axis);
                self.pending = cmd;
                if cmd.axis() != axis {
                    vec![Outbound::to(id, ServerMessage::warning("axis_clamped"))]
                } else {
                    Vec::new()
                }
            }
            ClientMessage::StartTask { task } => match self.start(task) {
                Ok(()) => Vec::new(),
                Err(code) => vec![Outbound::to(id, ServerMessage::error(code))],
            },
            ClientMessage::StopTask => {
                if self.stepper.is_none() {
                    return vec![Outbound::to(id, ServerMessage::error("no_task"))];
                }
                self.finish()
            }
            ClientMessage::SetBlindfold { on } => {
                self.blindfold = on;
                Vec::new()
            }
        }
    }

    fn start(&mut self, task: FeedbackMode) -> Result<(), &'static str> {
        if self.stepper.is_some() {
            return Err("task_active");
        }
        let (learner, learning) = if task == FeedbackMode::Training {
            let l = GvfLearner::new(
                self.config.codec.feature_length(),
                self.config.learner.alpha,
                self.config.learner.gamma,
            )
            .map_err(|_| "config")?;
            (Some(l), true)
        } else {
            let l = match &self.snapshot {
                Some(s) => Some(GvfLearner::restore(s).map_err(|_| "no_snapshot")?),
                None if task == FeedbackMode::Predictive => return Err("no_snapshot"),
                None => None,
            };
            (l, self.config.learner.online_learning)
        };
        let trial_seed = derive_seed(self.seed, 1000 + self.trials_started);
        let mut sim = self.config.sim.clone();
        sim.rng_seed = derive_seed(trial_seed, 1);
        let stepper = TrialStepper::new(StepperConfig {
            task,
            sim,
            codec: self.config.codec.clone(),
            thresholds: self.config.thresholds.clone(),
            min_on_ms: self.config.feedback.min_on_ms,
            learner,
            learning,
            seed: trial_seed,
        })
        .map_err(|_| "config")?;
        self.trials_started += 1;
        self.stepper = Some(stepper);
        self.blindfold = task.is_blindfolded();
        Ok(())
    }

    /// Finalise the running task: persist its log, keep a frozen snapshot
    /// after training, and report metrics to everyone.
    fn finish(&mut self) -> Vec<Outbound> {
        let Some(stepper) = self.stepper.take() else {
            return Vec::new();
        };
        let task = stepper.task();
        let (log, learner) = stepper.finish();
        let mut out = Vec::new();
        if task == FeedbackMode::Training {
            if let Some(l) = learner {
                self.snapshot = Some(l.snapshot());
            }
        }
        if let Err(e) = self.persist(task, &log) {
            tracing::error!("failed to persist {task} results: {e}");
            out.push(Outbound::all(ServerMessage::warning("persist_failed")));
        }
        match compute_metrics(&log, &self.config.codec) {
            Ok(metrics) => out.push(Outbound::all(ServerMessage::TaskEnded { metrics })),
            Err(e) => {
                tracing::error!("metrics for {task} failed: {e}");
                out.push(Outbound::all(ServerMessage::error("metrics_failed")));
            }
        }
        out
    }

    fn persist(&mut self, task: FeedbackMode, log: &TrialLog) -> foresight_core::Result<()> {
        let Some(dir) = &self.out_dir else {
            return Ok(());
        };
        let path = dir.join(format!("{:03}-{task}.log", self.trials_started));
        log.save(&path)?;
        self.saved.push(path);
        if task == FeedbackMode::Training {
            if let Some(s) = &self.snapshot {
                let path = dir.join("snapshot.json");
                s.save(&path)?;
                self.saved.push(path);
            }
        }
        Ok(())
    }

    /// Advance the running task by one tick using the last joystick command.
    /// Idle sessions do nothing. A task ends by itself after the configured
    /// duration.
    pub fn tick(&mut self) -> Vec<Outbound> {
        let blindfold = self.blindfold;
        let pending = self.pending;
        let Some(stepper) = self.stepper.as_mut() else {
            return Vec::new();
        };
        let task = stepper.task();
        let record = match stepper.tick(|_, _| pending) {
            Ok(r) => r,
            Err(e) => {
                tracing::error!("tick failed: {e}");
                let mut out = vec![Outbound::all(ServerMessage::error("tick_failed"))];
                out.extend(self.finish());
                return out;
            }
        };
        let mut out = vec![Outbound::all(ServerMessage::State {
            t: record.t,
            angle_deg: record.angle_deg,
            bin: record.bin,
            load: record.load,
            prediction: record.prediction,
            tactor: record.tactor_on,
            fired_rule: record.fired_rule,
            task: TaskLabel::from(Some(task)),
            blindfold,
        })];
        if stepper.ticks() >= self.config.trial.duration_ticks {
            out.extend(self.finish());
        }
        out
    }
}
