//! Simulated estimation API: the defender side of the query protocol.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use tokio::sync::oneshot;

use super::wire::{
    decode_pixels, ErrorBody, EstimateRequest, EstimateResponse, HealthBody, ESTIMATE_PATH, HEALTH_PATH, SESSION_HEADER,
};
use super::Estimator;
use crate::error::{Error, Result};
use crate::pose::EstimateSet;

/// Session used when a request carries no token.
const ANONYMOUS: &str = "anonymous";

struct AppState {
    model: Arc<dyn Estimator<f64>>,
    budget: Option<u64>,
    sessions: Mutex<HashMap<String, u64>>,
}

/// Running server; dropping it without [`shutdown`](Self::shutdown) leaves
/// the server thread running until process exit.
pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stop accepting connections, drain in-flight requests and join.
    pub fn shutdown(mut self) {
        self.stop();
    }

    /// Block until the server exits (on Ctrl-C when started with
    /// `stop_on_signal`).
    pub fn wait(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Serve `model` over HTTP on `bind`, allowing `budget` estimates per
/// session token (`None` = unlimited). With `stop_on_signal` the server also
/// shuts down gracefully on Ctrl-C.
pub fn serve_toy_oracle(
    model: Arc<dyn Estimator<f64>>,
    bind: SocketAddr,
    budget: Option<u64>,
    stop_on_signal: bool,
) -> Result<ServerHandle> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()?;
    let listener = runtime
        .block_on(tokio::net::TcpListener::bind(bind))
        .map_err(|e| Error::Transport(format!("cannot bind {bind}: {e}")))?;
    let addr = listener.local_addr()?;
    let state = Arc::new(AppState {
        model,
        budget,
        sessions: Mutex::new(HashMap::new()),
    });
    let app = router(state);
    let (tx, rx) = oneshot::channel::<()>();
    let thread = std::thread::Builder::new()
        .name("oracle-server".into())
        .spawn(move || {
            runtime.block_on(async move {
                let stop = async move {
                    if stop_on_signal {
                        tokio::select! {
                            _ = rx => {}
                            _ = tokio::signal::ctrl_c() => {}
                        }
                    } else {
                        let _ = rx.await;
                    }
                };
                let _ = axum::serve(listener, app).with_graceful_shutdown(stop).await;
            });
        })?;
    Ok(ServerHandle {
        addr,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}

fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route(HEALTH_PATH, get(health))
        .route(ESTIMATE_PATH, post(estimate))
        .with_state(state)
}

async fn health(State(state): State<Arc<AppState>>) -> Json<HealthBody> {
    Json(HealthBody {
        status: "ok".into(),
        model: state.model.name().to_string(),
        latent_free: true,
    })
}

fn reject(status: StatusCode, body: ErrorBody) -> Response {
    (status, Json(body)).into_response()
}

async fn estimate(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Response {
    let session = headers
        .get(SESSION_HEADER)
        .and_then(|v| v.to_str().ok())
        .unwrap_or(ANONYMOUS)
        .to_string();
    let Ok(req) = serde_json::from_slice::<EstimateRequest>(&body) else {
        return reject(StatusCode::BAD_REQUEST, ErrorBody::plain("bad_encoding"));
    };
    let Some(pixels) = decode_pixels(&req.pixels_b64) else {
        return reject(StatusCode::BAD_REQUEST, ErrorBody::plain("bad_encoding"));
    };
    let declared = req.width as usize * req.height as usize * req.channels as usize;
    if declared == 0 || pixels.len() != declared || declared != state.model.input_dim() {
        return reject(StatusCode::BAD_REQUEST, ErrorBody::plain("bad_dimensions"));
    }

    let count = {
        let mut sessions = state.sessions.lock().expect("session table poisoned");
        let count = sessions.entry(session.clone()).or_insert(0);
        if state.budget.is_some_and(|b| *count >= b) {
            return reject(StatusCode::TOO_MANY_REQUESTS, ErrorBody::budget_exhausted(*count));
        }
        *count += 1;
        *count
    };

    let x: Vec<f64> = pixels.into_iter().map(f64::from).collect();
    let est = state
        .model
        .estimate_flat(&x)
        .and_then(|flat| EstimateSet::from_flat(&flat));
    match est {
        Ok(est) => (StatusCode::OK, Json(EstimateResponse::new(&est, count))).into_response(),
        Err(_) => {
            if let Some(c) = state.sessions.lock().expect("session table poisoned").get_mut(&session) {
                *c -= 1;
            }
            reject(StatusCode::INTERNAL_SERVER_ERROR, ErrorBody::plain("model_failure"))
        }
    }
}
