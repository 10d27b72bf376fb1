//! Wire messages. One JSON object per text frame, discriminated by `type`.
//!
//! Field order in serialised output is the declaration order below, which is
//! the canonical order: `serialise(parse(m)) == m` for any canonical frame.

use foresight_core::{FeedbackMode, FiredRule, TrialMetrics};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Joystick { axis: f64 },
    StartTask { task: FeedbackMode },
    StopTask,
    SetBlindfold { on: bool },
}

pub const CLIENT_TYPES: [&str; 4] = ["joystick", "start_task", "stop_task", "set_blindfold"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Driver,
    Observer,
}

/// Task label in state frames: one of the four tasks, or idle between tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskLabel {
    Idle,
    Training,
    NoFeedback,
    Reactive,
    Predictive,
}

impl From<Option<FeedbackMode>> for TaskLabel {
    fn from(m: Option<FeedbackMode>) -> Self {
        match m {
            None => TaskLabel::Idle,
            Some(FeedbackMode::Training) => TaskLabel::Training,
            Some(FeedbackMode::NoFeedback) => TaskLabel::NoFeedback,
            Some(FeedbackMode::Reactive) => TaskLabel::Reactive,
            Some(FeedbackMode::Predictive) => TaskLabel::Predictive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ServerMessage {
    State {
        t: u64,
        angle_deg: f64,
        bin: usize,
        load: u16,
        prediction: f64,
        tactor: bool,
        fired_rule: FiredRule,
        task: TaskLabel,
        blindfold: bool,
    },
    TaskEnded {
        metrics: TrialMetrics,
    },
    Error {
        code: String,
    },
    Warning {
        code: String,
    },
    Role {
        role: Role,
    },
}

impl ServerMessage {
    pub fn error(code: &str) -> Self {
        ServerMessage::Error { code: code.into() }
    }

    pub fn warning(code: &str) -> Self {
        ServerMessage::Warning { code: code.into() }
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("server messages serialise")
    }
}

impl ClientMessage {
    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("client messages serialise")
    }
}

/// Why a frame was rejected. The string is the `code` of the error frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseFailure {
    UnknownType,
    BadMessage,
}

impl ParseFailure {
    pub fn code(&self) -> &'static str {
        match self {
            ParseFailure::UnknownType => "unknown_type",
            ParseFailure::BadMessage => "bad_message",
        }
    }
}

/// Parse a client frame, separating unknown message types from malformed ones.
pub fn parse_client(text: &str) -> Result<ClientMessage, ParseFailure> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|_| ParseFailure::BadMessage)?;
    match value.get("type").and_then(|t| t.as_str()) {
        Some(t) if CLIENT_TYPES.contains(&t) => {}
        Some(_) => return Err(ParseFailure::UnknownType),
        None => return Err(ParseFailure::BadMessage),
    }
    serde_json::from_value(value).map_err(|_| ParseFailure::BadMessage)
}
