//! The HTTP and WebSocket API against a real listener.

mod support;

use std::sync::Arc;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use reqwest::StatusCode;
use serde_json::{json, Value};
use stepflow_service::server::router;
use stepflow_service::{ManualClock, ServiceConfig};
use support::{host_with, script, QUESTIONS};
use tokio_tungstenite::tungstenite::Message;

async fn start() -> (String, Arc<ManualClock>) {
    let clock = Arc::new(ManualClock::new(0));
    let host = Arc::new(host_with(ServiceConfig::default(), script().transcript(0, "a barbecue"), clock.clone(), None));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(host)).await.unwrap() });
    (format!("127.0.0.1:{}", addr.port()), clock)
}

async fn create(client: &reqwest::Client, base: &str) -> Value {
    let r = client.post(format!("http://{base}/sessions")).json(&json!({"task_kind": "write"})).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::CREATED);
    r.json().await.unwrap()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn rest_session_lifecycle() {
    let (base, clock) = start().await;
    let client = reqwest::Client::new();
    assert_eq!(client.get(format!("http://{base}/health")).send().await.unwrap().text().await.unwrap(), "ok");
    let commands: Value = client.get(format!("http://{base}/commands")).send().await.unwrap().json().await.unwrap();
    assert!(commands.to_string().contains("skip question"));

    let created = create(&client, &base).await;
    assert_eq!(created["first_question"], json!({"id": 1, "text": QUESTIONS[0]}));
    let id = created["id"].as_str().unwrap().to_owned();

    let r = client.get(format!("http://{base}/sessions/{id}/draft")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);
    assert_eq!(r.json::<Value>().await.unwrap()["error"], "no draft yet");

    clock.advance(3_000);
    for (text, effect) in [("a picnic", "answered"), ("skip question", "skipped"), ("noon", "answered"), ("the lake", "draft_ready")] {
        let r: Value = client
            .post(format!("http://{base}/sessions/{id}/transcript"))
            .json(&json!({"text": text}))
            .send()
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        assert_eq!(r["outcome"]["effect"], effect, "{r}");
        assert_eq!(r["events"][0], json!({"type": "transcript", "text": text}));
    }

    let view: Value = client.get(format!("http://{base}/sessions/{id}")).send().await.unwrap().json().await.unwrap();
    assert_eq!(view["phase"], "revision");
    assert_eq!(view["timers"]["drafting_ms"], 3_000);
    assert_eq!(view["session"]["graph"]["skipped_questions"], json!([QUESTIONS[1]]));

    let draft: Value = client.get(format!("http://{base}/sessions/{id}/draft")).send().await.unwrap().json().await.unwrap();
    assert_eq!(draft["passes_used"], 1);
    assert_eq!(draft["tone"], "friendly");

    clock.advance(2_000);
    let saved: Value = client
        .post(format!("http://{base}/sessions/{id}/editor"))
        .json(&json!({"text": "Picnic at noon by the lake.", "final": true}))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(saved, json!({"phase": "done", "timers": {"drafting_ms": 3000, "revision_ms": 2000, "paused_ms": 0}}));
    let again = client
        .post(format!("http://{base}/sessions/{id}/editor"))
        .json(&json!({"text": "late edit"}))
        .send()
        .await
        .unwrap();
    assert_eq!(again.status(), StatusCode::CONFLICT);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn audio_memory_and_errors() {
    let (base, _clock) = start().await;
    let client = reqwest::Client::new();
    let id = create(&client, &base).await["id"].as_str().unwrap().to_owned();
    let view: Value = client.get(format!("http://{base}/sessions/{id}")).send().await.unwrap().json().await.unwrap();
    assert_eq!(view["active_question"]["text"], QUESTIONS[0]);

    let key = stepflow_service::tts::cache_key(QUESTIONS[0], "alloy");
    let r = client.get(format!("http://{base}/sessions/{id}/audio/{key}")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    assert_eq!(r.headers()["content-type"], "audio/wav");
    assert_eq!(&r.bytes().await.unwrap()[..4], b"RIFF");
    let r = client.get(format!("http://{base}/sessions/{id}/audio/{}", "0".repeat(64))).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);

    let r = client.get(format!("http://{base}/sessions/{}", uuid::Uuid::nil())).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);
    let r = client.get(format!("http://{base}/sessions/not-a-uuid")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);
    let r = client.post(format!("http://{base}/sessions")).json(&json!({"task_kind": "poem"})).send().await.unwrap();
    assert!(r.status().is_client_error());

    // No memory store is configured for this host.
    let r = client.post(format!("http://{base}/memory")).json(&json!({"key": "name", "value": "Sam"})).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn memory_endpoints_persist_facts() {
    let dir = tempfile::tempdir().unwrap();
    let config = ServiceConfig { memory_path: Some(dir.path().join("memory.json")), memory_enabled: true, ..ServiceConfig::default() };
    let host = Arc::new(host_with(config, script(), Arc::new(ManualClock::new(0)), None));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(host)).await.unwrap() });
    let client = reqwest::Client::new();
    let r = client.post(format!("http://{base}/memory")).json(&json!({"key": "full_name", "value": "Sam Lee"})).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::NO_CONTENT);
    let memory: Value = client.get(format!("http://{base}/memory")).send().await.unwrap().json().await.unwrap();
    assert!(memory.to_string().contains("Sam Lee"), "{memory}");
    assert!(std::fs::read_to_string(dir.path().join("memory.json")).unwrap().contains("Sam Lee"));
}

async fn next_event(ws: &mut (impl StreamExt<Item = Result<Message, tokio_tungstenite::tungstenite::Error>> + Unpin), kind: &str) -> Value {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(5), ws.next()).await.expect("event in time").unwrap().unwrap();
        if let Message::Text(text) = msg {
            let v: Value = serde_json::from_str(&text).unwrap();
            if v["type"] == kind {
                return v;
            }
        }
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn websocket_streams_events_for_text_and_audio() {
    let (base, _clock) = start().await;
    let client = reqwest::Client::new();
    let id = create(&client, &base).await["id"].as_str().unwrap().to_owned();
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{base}/sessions/{id}/stream")).await.unwrap();

    ws.send(Message::Text(json!({"type": "transcript", "text": "a picnic"}).to_string().into())).await.unwrap();
    assert_eq!(next_event(&mut ws, "transcript").await["text"], "a picnic");
    assert_eq!(next_event(&mut ws, "question").await["text"], QUESTIONS[1]);

    ws.send(Message::Text("{not json".into())).await.unwrap();
    assert!(next_event(&mut ws, "error").await["message"].as_str().unwrap().starts_with("bad frame"));

    // 400 ms of tone then silence past the thinking window.
    let tone: Vec<u8> = (0..16 * 400).flat_map(|i: i32| (if i % 2 == 0 { 12_000i16 } else { -12_000 }).to_le_bytes()).collect();
    ws.send(Message::Binary(tone.into())).await.unwrap();
    let start = next_event(&mut ws, "utterance").await;
    assert_eq!(start["kind"], "speech_start");
    ws.send(Message::Binary(vec![0u8; 2 * 16 * 1_700].into())).await.unwrap();
    assert_eq!(next_event(&mut ws, "transcript").await["text"], "a barbecue");
    assert_eq!(next_event(&mut ws, "question").await["text"], QUESTIONS[2]);
    ws.close(None).await.unwrap();
}
