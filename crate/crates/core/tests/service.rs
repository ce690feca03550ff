use std::future::IntoFuture;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use futures::{SinkExt, StreamExt};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;
use tower::ServiceExt;

use hhrl::runner::log::read_records;
use hhrl::runner::replay;
use hhrl::service::{http, SessionManager};

fn app() -> (tempfile::TempDir, SessionManager, axum::Router) {
    let dir = tempfile::tempdir().unwrap();
    let m = SessionManager::open(dir.path(), Duration::from_secs(900)).unwrap();
    let router = http::router(m.clone());
    (dir, m, router)
}

async fn call(router: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let res = router.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, value)
}

fn categories(acts: &Value) -> Vec<String> {
    acts.as_array().unwrap().iter().map(|a| a["category"].as_str().unwrap().to_string()).collect()
}

#[tokio::test]
async fn health() {
    let (_dir, _m, router) = app();
    let (status, body) = call(&router, "GET", "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["schema"], "hhrl.api/1");
}

#[tokio::test]
async fn full_session_over_http() {
    let (dir, _m, router) = app();
    let (status, body) = call(&router, "POST", "/v1/interventions", Some(json!({}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = body["intervention_id"].as_str().unwrap().to_string();

    let (status, started) = call(&router, "POST", &format!("/v1/interventions/{id}/sessions"), None).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(categories(&started["acts"]), ["disclosure", "promise", "instruction"]);
    let sid = started["session_id"].as_str().unwrap().to_string();

    let (status, _) = call(&router, "POST", &format!("/v1/interventions/{id}/sessions"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let event = |kind: &str| Some(json!({"kind": kind}));
    let (status, reply) = call(&router, "POST", &format!("/v1/sessions/{sid}/events"), event("mistake")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(categories(&reply["acts"]), ["feedback"]);
    assert_eq!(reply["state"]["game"]["mistakes"], 1);

    let mut last = Value::Null;
    for _ in 0..10 {
        let (status, r) = call(&router, "POST", &format!("/v1/sessions/{sid}/events"), event("correct_answer")).await;
        assert_eq!(status, StatusCode::OK);
        last = r;
    }
    assert_eq!(categories(&last["acts"]), ["promise", "inquiry"]);
    assert_eq!(last["state"]["phase"], "closing_inquiry");

    // answers are illegal during the closing inquiry
    let (status, err) = call(&router, "POST", &format!("/v1/sessions/{sid}/events"), event("mistake")).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["error"], "protocol");

    let (status, done) =
        call(&router, "POST", &format!("/v1/sessions/{sid}/events"), Some(json!({"kind": "inquiry_response", "payload": "good"}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(done["state"]["active"], false);

    let (status, info) = call(&router, "GET", &format!("/v1/interventions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(info["sessions_started"], 1);
    assert!(info["active_session"].is_null());

    let (status, report) = call(&router, "GET", &format!("/v1/interventions/{id}/report"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report["loc"]["episodes"], 10);
    assert!(report["engagement"].is_null());

    let (status, csv) = call(&router, "GET", &format!("/v1/interventions/{id}/report?format=csv"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(csv.as_str().unwrap().starts_with("table,episode,reward,running_mean\n"));

    // the durable log replays to the served tables
    let log = std::fs::File::open(dir.path().join(&id).join("events.ndjson")).unwrap();
    let records = read_records(std::io::BufReader::new(log)).unwrap();
    let replayed = replay(&records).unwrap();
    assert_eq!(serde_json::to_value(&replayed.loc_table).unwrap(), info["loc_table"]);
    assert_eq!(serde_json::to_value(&replayed.lof_table).unwrap(), info["lof_table"]);
}

#[tokio::test]
async fn errors_map_to_status_codes() {
    let (_dir, _m, router) = app();
    let (status, body) = call(&router, "GET", "/v1/interventions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "not_found");

    let (status, _) = call(&router, "GET", "/v1/sessions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, body) =
        call(&router, "POST", "/v1/interventions", Some(json!({"config": {"loc": {"learning_rate": 2.0}}}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "invalid_config");
    assert_eq!(body["path"], "loc.learning_rate");

    let (status, body) = call(&router, "POST", "/v1/interventions", Some(json!({"config": {"fixed_loc": 9}}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["path"], "fixed_loc");
}

#[tokio::test]
async fn operator_can_end_a_session_early() {
    let (_dir, _m, router) = app();
    let (_, body) = call(&router, "POST", "/v1/interventions", None).await;
    let id = body["intervention_id"].as_str().unwrap().to_string();
    let (_, started) = call(&router, "POST", &format!("/v1/interventions/{id}/sessions"), None).await;
    let sid = started["session_id"].as_str().unwrap().to_string();
    let (status, state) = call(&router, "POST", &format!("/v1/sessions/{sid}/end"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(state["active"], false);
    let (status, state) = call(&router, "GET", &format!("/v1/sessions/{sid}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(state["phase"], "ended");
    let (status, _) = call(&router, "POST", &format!("/v1/interventions/{id}/sessions"), None).await;
    assert_eq!(status, StatusCode::CREATED);
}

async fn next_json<S>(ws: &mut S) -> Value
where
    S: StreamExt<Item = Result<Message, tokio_tungstenite::tungstenite::Error>> + Unpin,
{
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(5), ws.next()).await.expect("frame in time").unwrap().unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

#[tokio::test]
async fn websocket_pushes_acts_and_session_end() {
    let dir = tempfile::tempdir().unwrap();
    let m = SessionManager::open(dir.path(), Duration::from_secs(900)).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(axum::serve(listener, http::router(m.clone())).into_future());

    let id = m.create_intervention(Default::default()).unwrap();
    let started = m.start_session(&id).unwrap();
    let sid = started.session_id;
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/v1/sessions/{sid}/ws")).await.unwrap();

    ws.send(Message::Text(json!({"type": "state"}).to_string().into())).await.unwrap();
    let state = next_json(&mut ws).await;
    assert_eq!(state["type"], "state");
    assert_eq!(state["state"]["phase"], "game_loop");

    ws.send(Message::Text(json!({"type": "event", "event": {"kind": "help_request"}}).to_string().into())).await.unwrap();
    let push = next_json(&mut ws).await;
    assert_eq!(push["type"], "acts");
    assert_eq!(push["schema"], "hhrl.api/1");
    assert_eq!(push["session_id"], sid.as_str());
    assert_eq!(categories(&push["acts"]), ["feedback"]);

    // events over HTTP reach websocket subscribers too
    m.submit_event(&sid, hhrl::LearnerEvent::new(hhrl::LearnerEventKind::CorrectAnswer, 0)).unwrap();
    let push = next_json(&mut ws).await;
    assert_eq!(categories(&push["acts"]), ["instruction"]);

    ws.send(Message::Text(json!({"type": "event", "event": {"kind": "inquiry_response"}}).to_string().into())).await.unwrap();
    let err = next_json(&mut ws).await;
    assert_eq!(err["type"], "error");
    assert_eq!(err["error"], "protocol");

    ws.send(Message::Text("not json".into())).await.unwrap();
    assert_eq!(next_json(&mut ws).await["error"], "bad_message");

    m.end_session(&sid).unwrap();
    let end = next_json(&mut ws).await;
    assert_eq!(end["type"], "session_ended");
    assert_eq!(end["early"], true);
}
