//! HTTP and websocket front end. Message schemas are in `docs/service.md`.

use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::broadcast::error::RecvError;

use super::{Push, ServiceError, SessionManager, API_SCHEMA};
use crate::config::ConfigFile;
use crate::controllers::LearnerEvent;
use crate::runner::report::ReportFormat;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, body) = match &self {
            ServiceError::Config(e) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({"error": "invalid_config", "path": e.path, "message": e.message}),
            ),
            ServiceError::NotFound(what) => (StatusCode::NOT_FOUND, json!({"error": "not_found", "message": what})),
            ServiceError::Conflict(_) => (StatusCode::CONFLICT, json!({"error": "conflict", "message": self.to_string()})),
            ServiceError::Protocol(e) => (
                StatusCode::CONFLICT,
                json!({"error": "protocol", "phase": e.phase, "event": e.event, "message": self.to_string()}),
            ),
            ServiceError::Io(_) | ServiceError::Log(_) => (
                StatusCode::INTERNAL_SERVER_ERROR,
                json!({"error": "internal", "message": self.to_string()}),
            ),
        };
        let mut body = body;
        body["schema"] = json!(API_SCHEMA);
        (status, Json(body)).into_response()
    }
}

pub fn router(manager: SessionManager) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/v1/interventions", post(create_intervention))
        .route("/v1/interventions/{id}", get(intervention_info))
        .route("/v1/interventions/{id}/sessions", post(start_session))
        .route("/v1/interventions/{id}/report", get(report))
        .route("/v1/sessions/{sid}", get(session_state))
        .route("/v1/sessions/{sid}/events", post(submit_event))
        .route("/v1/sessions/{sid}/end", post(end_session))
        .route("/v1/sessions/{sid}/ws", get(websocket))
        .with_state(manager)
}

/// Background task that closes idle sessions.
pub fn spawn_reaper(manager: SessionManager) -> tokio::task::JoinHandle<()> {
    let period = (manager.session_timeout() / 4).clamp(Duration::from_millis(50), Duration::from_secs(30));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let m = manager.clone();
            match tokio::task::spawn_blocking(move || m.reap_idle()).await {
                Ok(Ok(closed)) => {
                    for sid in closed {
                        tracing::info!(session = %sid, "closed idle session");
                    }
                }
                Ok(Err(e)) => tracing::error!("reaper: {e}"),
                Err(e) => tracing::error!("reaper task: {e}"),
            }
        }
    })
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({"schema": API_SCHEMA, "status": "ok"}))
}

#[derive(Debug, Default, Deserialize)]
struct CreateBody {
    #[serde(default)]
    config: Option<ConfigFile>,
}

async fn create_intervention(
    State(m): State<SessionManager>,
    body: Option<Json<CreateBody>>,
) -> Result<(StatusCode, Json<serde_json::Value>), ServiceError> {
    let file = body.and_then(|Json(b)| b.config).unwrap_or_default();
    let id = m.create_intervention(file)?;
    Ok((StatusCode::CREATED, Json(json!({"schema": API_SCHEMA, "intervention_id": id}))))
}

async fn intervention_info(State(m): State<SessionManager>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    Ok(Json(m.intervention_info(&id)?).into_response())
}

async fn start_session(State(m): State<SessionManager>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let started = m.start_session(&id)?;
    Ok((StatusCode::CREATED, Json(started)).into_response())
}

async fn submit_event(
    State(m): State<SessionManager>,
    Path(sid): Path<String>,
    Json(event): Json<LearnerEvent>,
) -> Result<Response, ServiceError> {
    Ok(Json(m.submit_event(&sid, event)?).into_response())
}

async fn session_state(State(m): State<SessionManager>, Path(sid): Path<String>) -> Result<Response, ServiceError> {
    Ok(Json(m.session_state(&sid)?).into_response())
}

async fn end_session(State(m): State<SessionManager>, Path(sid): Path<String>) -> Result<Response, ServiceError> {
    Ok(Json(m.end_session(&sid)?).into_response())
}

#[derive(Debug, Deserialize)]
struct ReportQuery {
    format: Option<ReportFormat>,
}

async fn report(
    State(m): State<SessionManager>,
    Path(id): Path<String>,
    Query(q): Query<ReportQuery>,
) -> Result<Response, ServiceError> {
    let report = m.report(&id)?;
    match q.format.unwrap_or(ReportFormat::Json) {
        ReportFormat::Json => Ok(Json(report).into_response()),
        ReportFormat::Csv => {
            let mut out = String::from("table,episode,reward,running_mean\n");
            for (name, t) in [("loc", &report.loc), ("lof", &report.lof)] {
                for i in 0..t.episodes {
                    out.push_str(&format!("{name},{},{},{}\n", i + 1, t.rewards[i], t.running_mean[i]));
                }
            }
            Ok(([(axum::http::header::CONTENT_TYPE, "text/csv")], out).into_response())
        }
    }
}

/// Client-to-server messages on the websocket.
#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ClientMessage {
    Event { event: LearnerEvent },
    State,
}

async fn websocket(
    State(m): State<SessionManager>,
    Path(sid): Path<String>,
    ws: WebSocketUpgrade,
) -> Result<Response, ServiceError> {
    let rx = m.subscribe(&sid)?;
    Ok(ws.on_upgrade(move |socket| serve_socket(m, sid, socket, rx)))
}

fn push_frame(push: &Push) -> Message {
    let mut v = serde_json::to_value(push).expect("push serializes");
    v["schema"] = json!(API_SCHEMA);
    Message::Text(v.to_string().into())
}

async fn serve_socket(
    m: SessionManager,
    sid: String,
    mut socket: WebSocket,
    mut rx: tokio::sync::broadcast::Receiver<Push>,
) {
    loop {
        tokio::select! {
            push = rx.recv() => match push {
                Ok(push) => {
                    let mine = match &push {
                        Push::Acts { session_id, .. } | Push::SessionEnded { session_id, .. } => *session_id == sid,
                    };
                    if mine && socket.send(push_frame(&push)).await.is_err() {
                        return;
                    }
                }
                Err(RecvError::Lagged(n)) => tracing::warn!(session = %sid, "client lagged by {n} pushes"),
                Err(RecvError::Closed) => return,
            },
            incoming = socket.recv() => {
                let Some(Ok(msg)) = incoming else { return };
                let text = match msg {
                    Message::Text(t) => t.to_string(),
                    Message::Close(_) => return,
                    _ => continue,
                };
                let reply = match serde_json::from_str::<ClientMessage>(&text) {
                    Err(e) => Some(json!({"type": "error", "error": "bad_message", "message": e.to_string()})),
                    Ok(ClientMessage::State) => {
                        let m = m.clone();
                        let sid = sid.clone();
                        match tokio::task::spawn_blocking(move || m.session_state(&sid)).await.expect("state task") {
                            Ok(state) => Some(json!({"type": "state", "state": state})),
                            Err(e) => Some(error_frame(&e)),
                        }
                    }
                    Ok(ClientMessage::Event { event }) => {
                        let m = m.clone();
                        let sid = sid.clone();
                        // acts arrive through the push channel
                        match tokio::task::spawn_blocking(move || m.submit_event(&sid, event)).await.expect("event task") {
                            Ok(_) => None,
                            Err(e) => Some(error_frame(&e)),
                        }
                    }
                };
                if let Some(mut reply) = reply {
                    reply["schema"] = json!(API_SCHEMA);
                    if socket.send(Message::Text(reply.to_string().into())).await.is_err() {
                        return;
                    }
                }
            }
        }
    }
}

fn error_frame(e: &ServiceError) -> serde_json::Value {
    let kind = match e {
        ServiceError::Protocol(_) => "protocol",
        ServiceError::NotFound(_) => "not_found",
        ServiceError::Conflict(_) => "conflict",
        ServiceError::Config(_) => "invalid_config",
        ServiceError::Io(_) | ServiceError::Log(_) => "internal",
    };
    json!({"type": "error", "error": kind, "message": e.to_string()})
}
