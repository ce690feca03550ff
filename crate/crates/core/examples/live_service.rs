//! Starts the service on an ephemeral port and plays a few turns through
//! the session manager while a websocket-style subscriber listens.

use std::future::IntoFuture;
use std::time::Duration;

use hhrl::controllers::{LearnerEvent, LearnerEventKind};
use hhrl::service::{http, SessionManager};

#[tokio::main]
async fn main() {
    let dir = std::env::temp_dir().join(format!("hhrl-example-{}", std::process::id()));
    let manager = SessionManager::open(&dir, Duration::from_secs(60)).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    println!("serving on http://{}", listener.local_addr().unwrap());
    let server = tokio::spawn(axum::serve(listener, http::router(manager.clone())).into_future());

    let id = manager.create_intervention(Default::default()).unwrap();
    let started = manager.start_session(&id).unwrap();
    let mut pushes = manager.subscribe(&started.session_id).unwrap();
    for act in &started.acts {
        println!("robot: {}", act.utterance);
    }
    for kind in [LearnerEventKind::Mistake, LearnerEventKind::CorrectAnswer] {
        manager.submit_event(&started.session_id, LearnerEvent::new(kind, 0)).unwrap();
        let push = pushes.recv().await.unwrap();
        println!("push: {}", serde_json::to_string(&push).unwrap());
    }
    let state = manager.end_session(&started.session_id).unwrap();
    println!("ended in phase {:?}", state.phase);
    server.abort();
    let _ = std::fs::remove_dir_all(dir);
}
