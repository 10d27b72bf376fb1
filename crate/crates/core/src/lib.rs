//! Online load prediction and anticipatory feedback for a simulated servo limb.
//!
//! The crate is organised bottom-up:
//!
//! * [`arm`] simulates a single servo joint inside a walled workspace and reports
//!   angle, velocity and a 0..=1024 load signal.
//! * [`features`] turns a servo reading into a sparse binary feature vector
//!   (position bin x motion direction, plus an always-on baseline unit).
//! * [`gvf`] learns a discounted prediction of future load with TD(0).
//! * [`feedback`] maps load and prediction onto a tactor on/off decision.
//! * [`operator`] provides scripted operators that steer the joint.
//! * [`harness`], [`metrics`], [`log`] and [`report`] run trials and the
//!   four-task protocol and aggregate the results.
//! * [`batch`] fans independent protocol runs out over worker threads.

pub mod arm;
pub mod batch;
pub mod config;
mod error;
pub mod features;
pub mod feedback;
pub mod gvf;
pub mod harness;
pub mod log;
pub mod metrics;
pub mod operator;
pub mod report;
mod seed;

pub use arm::{ArmSim, JoystickCommand, ServoState, SimConfig, LOAD_MAX};
pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use features::{bin_of, encode, CodecConfig, Direction, FeatureVector};
pub use feedback::{decide, FeedbackDecision, FeedbackMode, FeedbackThresholds, FiredRule};
pub use gvf::{GvfLearner, UpdateRecord, WeightSnapshot};
pub use harness::{run_trial, LearnerSource, TrialConfig, TrialOutcome, TrialStepper};
pub use log::{LogHeader, TrialLog, TrialStepRecord};
pub use metrics::{compute_metrics, TrialMetrics};
pub use operator::{Observation, OperatorState, Phase, ScriptedOperator, UserModelConfig};
pub use report::{run_protocol, ProtocolOutcome, ProtocolReport};
pub use seed::derive_seed;
