//! Network side: a web-socket endpoint plus the single session loop.
//!
//! Connections never touch the session directly. Each one forwards its frames
//! into one ordered queue and drains its own outbound queue.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::mpsc;
use tokio::time::MissedTickBehavior;

use crate::session::{ClientId, Outbound, Recipient, Session};
use crate::ServerError;

#[derive(Debug)]
pub enum Inbound {
    Connect(ClientId, mpsc::UnboundedSender<Frame>),
    Text(ClientId, String),
    Disconnect(ClientId),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Text(String),
    Close,
}

#[derive(Debug, Clone, Default)]
pub struct LoopOptions {
    /// Stop after this many ticks. `None` runs until every sender is gone.
    pub max_ticks: Option<u64>,
    /// Keep the wall-clock instant of every tick.
    pub record_ticks: bool,
}

#[derive(Debug, Default)]
pub struct LoopReport {
    pub ticks: u64,
    pub tick_instants: Vec<Instant>,
}

impl LoopReport {
    /// Gaps between consecutive ticks.
    pub fn intervals(&self) -> Vec<Duration> {
        self.tick_instants
            .windows(2)
            .map(|w| w[1].duration_since(w[0]))
            .collect()
    }
}

fn dispatch(clients: &mut HashMap<ClientId, mpsc::UnboundedSender<Frame>>, out: Vec<Outbound>) {
    for o in out {
        match o {
            Outbound::Send(Recipient::All, m) => {
                let text = m.to_text();
                clients.retain(|_, tx| tx.send(Frame::Text(text.clone())).is_ok());
            }
            Outbound::Send(Recipient::Client(id), m) => {
                if let Some(tx) = clients.get(&id) {
                    let _ = tx.send(Frame::Text(m.to_text()));
                }
            }
            Outbound::Close(id) => {
                if let Some(tx) = clients.remove(&id) {
                    let _ = tx.send(Frame::Close);
                }
            }
        }
    }
}

/// Own the session and tick it every `dt_ms` against a monotonic clock. Late
/// ticks run back-to-back rather than being dropped.
pub async fn run_loop(
    mut session: Session,
    mut inbound: mpsc::UnboundedReceiver<Inbound>,
    options: LoopOptions,
) -> (Session, LoopReport) {
    let period = Duration::from_secs_f64(session.dt_ms() / 1000.0);
    let mut interval = tokio::time::interval(period);
    interval.set_missed_tick_behavior(MissedTickBehavior::Burst);
    let mut clients: HashMap<ClientId, mpsc::UnboundedSender<Frame>> = HashMap::new();
    let mut report = LoopReport::default();
    let mut inbound_open = true;

    loop {
        if options.max_ticks.is_some_and(|m| report.ticks >= m) {
            break;
        }
        tokio::select! {
            biased;
            _ = interval.tick() => {
                if options.record_ticks {
                    report.tick_instants.push(Instant::now());
                }
                report.ticks += 1;
                let out = session.tick();
                dispatch(&mut clients, out);
            }
            event = inbound.recv(), if inbound_open => {
                let out = match event {
                    Some(Inbound::Connect(id, tx)) => {
                        clients.insert(id, tx);
                        session.connect(id)
                    }
                    Some(Inbound::Text(id, text)) => session.handle_text(id, &text),
                    Some(Inbound::Disconnect(id)) => {
                        clients.remove(&id);
                        session.disconnect(id)
                    }
                    None => {
                        inbound_open = false;
                        if options.max_ticks.is_none() {
                            break;
                        }
                        Vec::new()
                    }
                };
                dispatch(&mut clients, out);
            }
        }
    }
    (session, report)
}

#[derive(Clone)]
struct AppState {
    inbound: mpsc::UnboundedSender<Inbound>,
    next_id: Arc<AtomicU64>,
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(app): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| client_connection(socket, app))
}

async fn index() -> &'static str {
    "foresight session server: connect a web socket to /ws\n"
}

async fn client_connection(socket: WebSocket, app: AppState) {
    let id = app.next_id.fetch_add(1, Ordering::Relaxed);
    let (mut sink, mut stream) = socket.split();
    let (tx, mut rx) = mpsc::unbounded_channel::<Frame>();
    if app.inbound.send(Inbound::Connect(id, tx)).is_err() {
        return;
    }

    let writer = tokio::spawn(async move {
        while let Some(frame) = rx.recv().await {
            match frame {
                Frame::Text(t) => {
                    if sink.send(Message::Text(t.into())).await.is_err() {
                        break;
                    }
                }
                Frame::Close => {
                    let _ = sink.send(Message::Close(None)).await;
                    break;
                }
            }
        }
    });

    while let Some(Ok(msg)) = stream.next().await {
        match msg {
            Message::Text(t) => {
                if app.inbound.send(Inbound::Text(id, t.to_string())).is_err() {
                    break;
                }
            }
            Message::Close(_) => break,
            _ => {}
        }
        if writer.is_finished() {
            break;
        }
    }
    let _ = app.inbound.send(Inbound::Disconnect(id));
    writer.abort();
}

pub fn router(inbound: mpsc::UnboundedSender<Inbound>) -> Router {
    Router::new()
        .route("/", get(index))
        .route("/ws", get(ws_upgrade))
        .with_state(AppState {
            inbound,
            next_id: Arc::new(AtomicU64::new(1)),
        })
}

pub async fn bind(addr: SocketAddr) -> Result<TcpListener, ServerError> {
    TcpListener::bind(addr)
        .await
        .map_err(|source| ServerError::Bind { addr, source })
}

/// Serve until the listener fails.
pub async fn serve(listener: TcpListener, session: Session) -> Result<(), ServerError> {
    let (tx, rx) = mpsc::unbounded_channel();
    let session_loop = tokio::spawn(run_loop(session, rx, LoopOptions::default()));
    let result = axum::serve(listener, router(tx)).await;
    session_loop.abort();
    result.map_err(ServerError::Io)
}
