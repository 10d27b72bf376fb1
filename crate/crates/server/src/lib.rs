//! Live sessions: a human drives the simulated limb over a web socket while
//! the server ticks the same pipeline the scripted harness uses.
//!
//! Frames are JSON objects tagged by `type`:
//!
//! | direction | frame |
//! |-----------|-------|
//! | client | `{"type":"joystick","axis":0.5}` |
//! | client | `{"type":"start_task","task":"training"}` |
//! | client | `{"type":"stop_task"}` |
//! | client | `{"type":"set_blindfold","on":true}` |
//! | server | `{"type":"state","t":..,"angle_deg":..,"bin":..,"load":..,"prediction":..,"tactor":..,"fired_rule":..,"task":..,"blindfold":..}` |
//! | server | `{"type":"task_ended","metrics":{..}}` |
//! | server | `{"type":"error","code":".."}`, `{"type":"warning","code":".."}` |
//! | server | `{"type":"role","role":"driver"}` |

use std::net::SocketAddr;

pub mod protocol;
pub mod serve;
pub mod session;

pub use protocol::{parse_client, ClientMessage, Role, ServerMessage, TaskLabel};
pub use serve::{bind, router, run_loop, serve, Inbound, LoopOptions, LoopReport};
pub use session::{ClientId, Outbound, Recipient, Session};

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] foresight_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
