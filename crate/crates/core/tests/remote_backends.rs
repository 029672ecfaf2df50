//! Remote encoder, completion and search clients against local servers.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::routing::{get, post};
use axum::{Json, Router};
use graphtag_core::calibrate;
use graphtag_core::encoder::{Encoder, RemoteEncoder};
use graphtag_core::genkit::{
    CompletionClient, CompletionRequest, HttpSearchClient, PromptTemplates, RemoteCompletionClient,
    SearchClient,
};
use graphtag_core::types::{Content, Tag};
use graphtag_core::Error;
use serde_json::{json, Value};

#[derive(Default)]
struct Stats {
    active: AtomicUsize,
    peak: AtomicUsize,
}

/// Serves `router` on an ephemeral port from a background runtime.
fn spawn(router: Router) -> SocketAddr {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, router).await.unwrap();
        });
    });
    rx.recv().unwrap()
}

fn authorized(headers: &HeaderMap) -> bool {
    headers.get("authorization").and_then(|v| v.to_str().ok()) == Some("Bearer sekret")
}

async fn embed(
    State(stats): State<Arc<Stats>>,
    headers: HeaderMap,
    Json(body): Json<Value>,
) -> (StatusCode, Json<Value>) {
    if !authorized(&headers) {
        return (StatusCode::UNAUTHORIZED, Json(json!({"error": "no token"})));
    }
    let now = stats.active.fetch_add(1, Ordering::SeqCst) + 1;
    stats.peak.fetch_max(now, Ordering::SeqCst);
    tokio::time::sleep(Duration::from_millis(20)).await;
    stats.active.fetch_sub(1, Ordering::SeqCst);
    let data: Vec<Value> = body["input"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| {
            let s = t.as_str().unwrap();
            if s == "wrong-dim" {
                json!({"embedding": [1.0]})
            } else {
                json!({"embedding": [s.len() as f64, 1.0, 0.0]})
            }
        })
        .collect();
    (StatusCode::OK, Json(json!({ "data": data })))
}

async fn complete(Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
    let prompt = body["prompt"].as_str().unwrap_or_default();
    if prompt.contains("explode") {
        return (
            StatusCode::INTERNAL_SERVER_ERROR,
            Json(json!({"error": "boom"})),
        );
    }
    if body["want_token_scores"] == json!(true) {
        return (
            StatusCode::OK,
            Json(json!({
                "text": "Yes",
                "token_scores": [{
                    "token": "Yes",
                    "logprob": -0.2,
                    "top_alternatives": [{"token": "No", "logprob": -1.8}]
                }]
            })),
        );
    }
    (
        StatusCode::OK,
        Json(json!({ "text": format!("TAG: echo {}", body["max_tokens"]) })),
    )
}

async fn search(Query(q): Query<HashMap<String, String>>) -> Json<Value> {
    let n: usize = q["n"].parse().unwrap();
    let results: Vec<Value> = (0..n)
        .map(|i| json!({"text": format!("{} result {i}", q["q"])}))
        .collect();
    Json(json!({ "results": results }))
}

fn servers() -> (SocketAddr, Arc<Stats>) {
    let stats = Arc::new(Stats::default());
    let router = Router::new()
        .route("/embed", post(embed))
        .with_state(Arc::clone(&stats))
        .route("/complete", post(complete))
        .route("/search", get(search));
    (spawn(router), stats)
}

#[test]
fn remote_encoder_round_trip_and_limit() {
    let (addr, stats) = servers();
    let enc = Arc::new(
        RemoteEncoder::new(format!("http://{addr}/embed"), Some("sekret".into()), 3, 2).unwrap(),
    );
    let e = enc.embed("abcd").unwrap();
    assert_eq!(e.values(), &[4.0, 1.0, 0.0]);
    let batch = enc.embed_batch(&["a", "bb"]).unwrap();
    assert_eq!(batch[1].values()[0], 2.0);

    let handles: Vec<_> = (0..8)
        .map(|i| {
            let enc = Arc::clone(&enc);
            std::thread::spawn(move || enc.embed(&format!("text {i}")).unwrap())
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    assert!(
        stats.peak.load(Ordering::SeqCst) <= 2,
        "in-flight limit exceeded"
    );

    assert!(matches!(
        enc.embed("wrong-dim"),
        Err(Error::BackendUnavailable(_))
    ));
    let no_token = RemoteEncoder::new(format!("http://{addr}/embed"), None, 3, 2).unwrap();
    assert!(matches!(
        no_token.embed("x"),
        Err(Error::BackendUnavailable(_))
    ));
}

#[test]
fn remote_completion_and_confidence() {
    let (addr, _) = servers();
    let client =
        RemoteCompletionClient::new(format!("http://{addr}/complete"), None, 4, true).unwrap();
    let c = client
        .complete(&CompletionRequest::new("hello", 7))
        .unwrap();
    assert_eq!(c.text, "TAG: echo 7");
    assert!(c.token_scores.is_none());

    let content = Content::titled("c", "Seals").unwrap();
    let tag = Tag::named("t", "Seals").unwrap();
    let conf = calibrate::confidence(&client, &PromptTemplates::default(), &content, &tag).unwrap();
    let want = (-0.2f64).exp() / ((-0.2f64).exp() + (-1.8f64).exp());
    assert!((conf - want).abs() < 1e-12);

    let err = client
        .complete(&CompletionRequest::new("please explode", 1))
        .unwrap_err();
    assert!(matches!(err, Error::BackendUnavailable(_)));
    assert!(err.is_retryable());
}

#[test]
fn search_client_queries() {
    let (addr, _) = servers();
    let s = HttpSearchClient::new(format!("http://{addr}/search"), None, 2).unwrap();
    assert_eq!(
        s.search("seals & boats", 2).unwrap(),
        ["seals & boats result 0", "seals & boats result 1"]
    );
}

#[test]
fn unreachable_backend_is_unavailable() {
    // Bind then drop to get a port with nothing listening.
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let enc = RemoteEncoder::new(format!("http://127.0.0.1:{port}/embed"), None, 3, 1).unwrap();
    assert!(matches!(enc.embed("x"), Err(Error::BackendUnavailable(_))));
    assert!(matches!(
        RemoteEncoder::new("", None, 3, 1),
        Err(Error::Config(_))
    ));
}
