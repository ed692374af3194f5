//! WebSocket front end for teleop sessions.
//!
//! Each session id gets one task that owns the [`Session`] and advances it
//! on a timer; connections talk to it through bounded queues. A connection
//! whose outgoing queue fills up is dropped, the session carries on.

use std::collections::HashMap;
use std::future::Future;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::mpsc;
use uwbnav_core::config::RunConfig;
use uwbnav_core::eval::compute_metrics;
use uwbnav_core::sim::ScenarioSpec;
use uwbnav_core::teleop::{ConnId, Outcome, Recipient, Session, SessionStatus};

use crate::{create_run_dir, load_scenario_file, runtime, CliError};

enum Input {
    Connect(ConnId, mpsc::Sender<String>),
    Text(ConnId, String),
    Disconnect(ConnId),
}

pub struct ServerState {
    cfg: RunConfig,
    scenario: ScenarioSpec,
    sessions_dir: PathBuf,
    registry: Mutex<HashMap<String, mpsc::Sender<Input>>>,
    next_conn: AtomicU64,
    next_session: AtomicU64,
}

impl ServerState {
    /// Finished human runs are written under `sessions_dir`.
    pub fn new(cfg: RunConfig, scenario: ScenarioSpec, sessions_dir: PathBuf) -> Arc<Self> {
        Arc::new(Self {
            cfg,
            scenario,
            sessions_dir,
            registry: Mutex::new(HashMap::new()),
            next_conn: AtomicU64::new(1),
            next_session: AtomicU64::new(0),
        })
    }

    fn session_sender(self: &Arc<Self>, id: &str) -> mpsc::Sender<Input> {
        let mut reg = self.registry.lock().unwrap();
        if let Some(tx) = reg.get(id).filter(|tx| !tx.is_closed()) {
            return tx.clone();
        }
        let (tx, rx) = mpsc::channel(256);
        reg.insert(id.to_string(), tx.clone());
        tokio::spawn(session_task(self.clone(), id.to_string(), rx));
        tx
    }
}

pub fn router(state: Arc<ServerState>) -> Router {
    Router::new().route("/session/{id}", get(upgrade)).with_state(state)
}

async fn upgrade(ws: WebSocketUpgrade, Path(id): Path<String>, State(state): State<Arc<ServerState>>) -> Response {
    ws.on_upgrade(move |socket| client(socket, id, state))
}

async fn client(socket: WebSocket, id: String, state: Arc<ServerState>) {
    let conn = state.next_conn.fetch_add(1, Ordering::Relaxed);
    let (out_tx, mut out_rx) = mpsc::channel::<String>(state.cfg.serve.queue);
    let mut session = state.session_sender(&id);
    if session.send(Input::Connect(conn, out_tx.clone())).await.is_err() {
        // the session ended between lookup and connect
        session = state.session_sender(&id);
        if session.send(Input::Connect(conn, out_tx)).await.is_err() {
            return;
        }
    } else {
        drop(out_tx);
    }
    let (mut sink, mut stream) = socket.split();
    let writer = tokio::spawn(async move {
        while let Some(text) = out_rx.recv().await {
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });
    while let Some(Ok(msg)) = stream.next().await {
        let text = match msg {
            Message::Text(t) => t.to_string(),
            Message::Binary(_) => "<binary frame>".to_string(),
            Message::Close(_) => break,
            _ => continue,
        };
        if session.send(Input::Text(conn, text)).await.is_err() {
            break;
        }
    }
    let _ = session.send(Input::Disconnect(conn)).await;
    writer.abort();
}

async fn session_task(state: Arc<ServerState>, id: String, mut rx: mpsc::Receiver<Input>) {
    let cfg = &state.cfg;
    let seed = cfg.seed + state.next_session.fetch_add(1, Ordering::Relaxed);
    let mut session = match Session::new(id.clone(), state.scenario.clone(), cfg.eval_config(cfg.uwb.noise.sigma), seed) {
        Ok(s) => s.keep_aborted(cfg.serve.aborted_counts_as_failure),
        Err(e) => {
            eprintln!("session {id}: {e}");
            return;
        }
    };
    let mut conns: HashMap<ConnId, mpsc::Sender<String>> = HashMap::new();
    let period = Duration::from_secs_f64(cfg.sim.control_dt() / cfg.serve.speed);
    let mut timer = tokio::time::interval(period);
    timer.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        let running = session.status() == SessionStatus::Running;
        let out = tokio::select! {
            input = rx.recv() => match input {
                None => break,
                Some(Input::Connect(c, tx)) => {
                    conns.insert(c, tx);
                    session.connect(c);
                    Vec::new()
                }
                Some(Input::Text(c, text)) => session.receive(c, &text),
                Some(Input::Disconnect(c)) => {
                    conns.remove(&c);
                    session.disconnect(c)
                }
            },
            _ = timer.tick(), if running => session.tick(),
        };
        deliver(&mut session, &mut conns, out);
        if let SessionStatus::Finished(outcome) = session.status() {
            persist(&state, &session, outcome, seed);
            // New connections to this id now start a fresh session; dropping
            // the senders below closes the remaining sockets after the result.
            rx.close();
            break;
        }
    }
    let mut reg = state.registry.lock().unwrap();
    if reg.get(&id).is_some_and(|tx| tx.is_closed()) {
        reg.remove(&id);
    }
}

fn deliver(session: &mut Session, conns: &mut HashMap<ConnId, mpsc::Sender<String>>, out: Vec<uwbnav_core::teleop::Outgoing>) {
    let mut queue = std::collections::VecDeque::from(out);
    while let Some(o) = queue.pop_front() {
        let text = o.msg.to_json();
        let targets: Vec<ConnId> = match o.to {
            Recipient::One(c) => vec![c],
            Recipient::All => {
                let mut all: Vec<ConnId> = conns.keys().copied().collect();
                all.sort_unstable();
                all
            }
        };
        for c in targets {
            let Some(tx) = conns.get(&c) else { continue };
            if tx.try_send(text.clone()).is_err() {
                conns.remove(&c);
                queue.extend(session.disconnect(c));
            }
        }
    }
}

fn persist(state: &ServerState, session: &Session, outcome: Outcome, seed: u64) {
    let log = match session.log() {
        Some(log) => log.clone(),
        None => return eprintln!("session {}: aborted, left out of metrics", session.id()),
    };
    let path = state.sessions_dir.join(format!("{}-{seed}.jsonl", session.id()));
    if let Err(e) = std::fs::create_dir_all(&state.sessions_dir).and_then(|_| log.write(&path)) {
        eprintln!("session {}: cannot write {}: {e}", session.id(), path.display());
        return;
    }
    match compute_metrics(std::slice::from_ref(&log)) {
        Ok(m) => eprintln!(
            "session {}: {:?}, t_mean {}, log {}",
            session.id(),
            outcome,
            m.t_mean.map_or("-".into(), |t| format!("{t:.1} s")),
            path.display()
        ),
        Err(e) => eprintln!("session {}: {e}", session.id()),
    }
}

/// Serves until `shutdown` resolves.
pub async fn serve(listener: TcpListener, state: Arc<ServerState>, shutdown: impl Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

pub fn run_blocking(cfg: &RunConfig) -> Result<(), CliError> {
    let scenario_path = cfg
        .eval
        .scenarios
        .first()
        .ok_or_else(|| CliError::Config("serve needs a scenario (--scenario)".into()))?;
    let scenario = load_scenario_file(scenario_path)?;
    let run_dir = create_run_dir(cfg, "serve")?;
    let rt = tokio::runtime::Runtime::new().map_err(runtime)?;
    rt.block_on(async {
        let addr = format!("{}:{}", cfg.serve.host, cfg.serve.port);
        let listener = TcpListener::bind(&addr)
            .await
            .map_err(|e| runtime(format!("cannot bind {addr}: {e}")))?;
        eprintln!(
            "serving {} on ws://{}/session/{{id}}; logs in {}",
            scenario.name,
            listener.local_addr().map_err(runtime)?,
            run_dir.join("sessions").display()
        );
        let state = ServerState::new(cfg.clone(), scenario, run_dir.join("sessions"));
        serve(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(runtime)
    })
}
