//! HTTP/WebSocket front end. `GET /session/{token}` upgrades to a socket that
//! drives that token's session.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use tokio::net::TcpListener;
use tokio::time::MissedTickBehavior;

use crate::messages::{ClientMsg, ServerMsg};
use crate::session::{Session, SessionConfig};
use crate::study::{aborted_marker, complete_marker, Study};

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub log_dir: PathBuf,
    pub session: SessionConfig,
}

struct Slot {
    session: Arc<Mutex<Session>>,
    connected: bool,
    generation: u64,
}

/// Shared server state: the study and the live sessions by token.
#[derive(Clone)]
pub struct AppState {
    study: Arc<Study>,
    config: Arc<ServerConfig>,
    slots: Arc<Mutex<HashMap<String, Slot>>>,
}

impl AppState {
    pub fn new(study: Study, config: ServerConfig) -> Self {
        AppState {
            study: Arc::new(study),
            config: Arc::new(config),
            slots: Arc::default(),
        }
    }

    /// Starts or resumes the token's session, or says why not.
    fn claim(&self, token: &str) -> Result<(Arc<Mutex<Session>>, u64), String> {
        let entry = self.study.get(token).ok_or("unknown token")?;
        let dir = &self.config.log_dir;
        if complete_marker(dir, token).exists() {
            return Err("token already completed".into());
        }
        if aborted_marker(dir, token).exists() {
            return Err("token session was aborted".into());
        }
        let mut slots = self.slots.lock().expect("slots lock");
        if let Some(slot) = slots.get_mut(token) {
            if slot.connected {
                return Err("token already in use".into());
            }
            slot.connected = true;
            slot.generation += 1;
            return Ok((slot.session.clone(), slot.generation));
        }
        let session = Session::start(entry, self.config.session.clone(), dir).map_err(|e| e.to_string())?;
        let session = Arc::new(Mutex::new(session));
        slots.insert(
            token.to_string(),
            Slot {
                session: session.clone(),
                connected: true,
                generation: 0,
            },
        );
        Ok((session, 0))
    }

    fn release(&self, token: &str, generation: u64, ended: bool) {
        let mut slots = self.slots.lock().expect("slots lock");
        if ended {
            slots.remove(token);
            return;
        }
        if let Some(slot) = slots.get_mut(token) {
            slot.connected = false;
        }
        drop(slots);
        log::info!("session {token} paused");
        let state = self.clone();
        let token = token.to_string();
        tokio::spawn(async move {
            tokio::time::sleep(state.config.session.reconnect_grace).await;
            let mut slots = state.slots.lock().expect("slots lock");
            let stale = slots
                .get(&token)
                .is_some_and(|s| !s.connected && s.generation == generation);
            if stale {
                let slot = slots.remove(&token).expect("present");
                if let Err(e) = slot.session.lock().expect("session lock").abort() {
                    log::error!("aborting {token}: {e}");
                }
                log::warn!("session {token} aborted after disconnect");
            }
        });
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/session/{token}", get(ws_handler))
        .with_state(state)
}

async fn ws_handler(Path(token): Path<String>, State(state): State<AppState>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| run_socket(state, token, socket))
}

async fn send(socket: &mut WebSocket, msg: &ServerMsg) -> bool {
    socket.send(Message::Text(msg.to_json().into())).await.is_ok()
}

async fn run_socket(state: AppState, token: String, mut socket: WebSocket) {
    let (session, generation) = match state.claim(&token) {
        Ok(s) => s,
        Err(msg) => {
            send(&mut socket, &ServerMsg::error(msg)).await;
            let _ = socket.send(Message::Close(None)).await;
            return;
        }
    };
    let first = {
        let mut s = session.lock().expect("session lock");
        vec![s.phase_message(), s.frame_message()]
    };
    let mut connected = true;
    for m in &first {
        connected &= send(&mut socket, m).await;
    }
    let mut held: Vec<String> = Vec::new();
    let mut interval = tokio::time::interval(state.config.session.tick_period());
    interval.set_missed_tick_behavior(MissedTickBehavior::Delay);
    interval.tick().await;
    let mut ended = false;
    while connected && !ended {
        tokio::select! {
            _ = interval.tick() => {
                let out = {
                    let mut s = session.lock().expect("session lock");
                    let out = s.tick(&held);
                    ended = s.is_ended();
                    out
                };
                match out {
                    Ok(msgs) => {
                        for m in &msgs {
                            connected &= send(&mut socket, m).await;
                        }
                    }
                    Err(e) => {
                        log::error!("session {token}: {e}");
                        send(&mut socket, &ServerMsg::error(e.to_string())).await;
                        ended = true;
                    }
                }
            }
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Text(text))) => match ClientMsg::parse(&text) {
                    Ok(ClientMsg::Keys { held: keys }) => held = keys,
                    Ok(ClientMsg::Ready) => {
                        let out = session.lock().expect("session lock").ready();
                        let msgs = out.unwrap_or_else(|e| vec![ServerMsg::error(e)]);
                        for m in &msgs {
                            connected &= send(&mut socket, m).await;
                        }
                    }
                    Err(e) => connected &= send(&mut socket, &ServerMsg::error(e)).await,
                },
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => connected = false,
                Some(Ok(_)) => {}
            },
        }
    }
    if ended {
        let _ = socket.send(Message::Close(None)).await;
    }
    state.release(&token, generation, ended);
}

/// Serves on an already bound listener until the task is dropped.
pub async fn serve(listener: TcpListener, study: Study, config: ServerConfig) -> std::io::Result<()> {
    config.session.validate().map_err(std::io::Error::other)?;
    std::fs::create_dir_all(&config.log_dir)?;
    axum::serve(listener, router(AppState::new(study, config))).await
}

/// Binds `addr` and serves forever on a fresh runtime.
pub fn run_blocking(addr: SocketAddr, study: Study, config: ServerConfig) -> std::io::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = TcpListener::bind(addr).await?;
        log::info!("play service listening on {}", listener.local_addr()?);
        serve(listener, study, config).await
    })
}
