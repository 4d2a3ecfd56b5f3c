use std::sync::{Arc, RwLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use spanshift::model::validate_spans;
use spanshift::review::ReviewSession;
use spanshift::{AnswerSpan, Article, Dataset, Paragraph, QaItem};
use spanshift_review::router;
use tower::ServiceExt;

fn candidates(n: usize) -> Dataset {
    let paragraphs = (0..n)
        .map(|i| {
            let context = format!("वाक्य क्रमांक {i} येथे आहे. दुसरे वाक्य {i} आहे.");
            Paragraph::new(
                context,
                vec![QaItem::answerable(format!("q{i}"), format!("प्रश्न {i}?"), vec![AnswerSpan::new("वाक्य", 0)])],
            )
        })
        .collect();
    Dataset::new(vec![Article::new("लेख", paragraphs)])
}

fn app(dataset: Dataset) -> Router {
    router(Arc::new(RwLock::new(ReviewSession::in_memory(dataset).unwrap())), None)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or(Value::Null) };
    (status, value)
}

#[tokio::test]
async fn scripted_review_of_twenty_items() {
    let app = app(candidates(20));
    for step in 0..20 {
        let (status, next) = call(&app, "GET", "/api/queue/next", None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(next["done"], false);
        let id = next["example"]["qa_id"].as_str().unwrap().to_owned();
        assert_eq!(id, format!("q{step}"));
        let context = next["example"]["context"].as_str().unwrap();
        let body = match step {
            0..=14 => json!({ "decision": "accept", "reviewer": "r1" }),
            15..=17 => {
                // "दुसरे वाक्य N" starts right after the first sentence
                let start = context.chars().position(|c| c == 'द').unwrap();
                json!({ "decision": "corrected", "corrected_text": "दुसरे वाक्य", "corrected_start": start })
            }
            _ => json!({ "decision": "reject" }),
        };
        let (status, ack) = call(&app, "POST", &format!("/api/examples/{id}/verdict"), Some(body)).await;
        assert_eq!(status, StatusCode::OK, "{ack}");
        assert_eq!(ack["progress"]["reviewed"], step + 1);
        assert!(ack["verdict"]["timestamp"].as_u64().unwrap() > 0);
    }
    let (_, next) = call(&app, "GET", "/api/queue/next", None).await;
    assert_eq!(next, json!({ "done": true }));

    let (_, progress) = call(&app, "GET", "/api/progress", None).await;
    assert_eq!(
        progress,
        json!({ "total": 20, "reviewed": 20, "unreviewed": 0, "accepted": 15, "corrected": 3, "rejected": 2 })
    );

    let (status, exported) = call(&app, "GET", "/api/export", None).await;
    assert_eq!(status, StatusCode::OK);
    let gold: Dataset = serde_json::from_value(exported).unwrap();
    assert_eq!(gold.qa_count(), 18);
    assert!(validate_spans(&gold).is_empty());
    let corrected = gold.qas().find(|(_, _, q)| q.id == "q16").unwrap().2;
    assert_eq!(corrected.answers[0].text, "दुसरे वाक्य");
    assert!(gold.qas().all(|(_, _, q)| q.id != "q18" && q.id != "q19"));
}

#[tokio::test]
async fn invalid_correction_reports_expected_and_actual() {
    let app = app(candidates(2));
    let (status, err) = call(
        &app,
        "POST",
        "/api/examples/q0/verdict",
        Some(json!({ "decision": "corrected", "corrected_text": "वाक्य", "corrected_start": 1 })),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["expected"], "वाक्य");
    assert_eq!(err["actual"], "ाक्य ");
    let (_, progress) = call(&app, "GET", "/api/progress", None).await;
    assert_eq!(progress["reviewed"], 0);
}

#[tokio::test]
async fn unknown_and_mismatched_ids() {
    let app = app(candidates(2));
    let (status, _) = call(&app, "GET", "/api/examples/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, "POST", "/api/examples/nope/verdict", Some(json!({ "decision": "accept" }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) =
        call(&app, "POST", "/api/examples/q0/verdict", Some(json!({ "decision": "accept", "qa_id": "q1" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "POST", "/api/examples/q0/verdict", Some(json!({ "decision": "corrected" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "POST", "/api/examples/q0/verdict", Some(json!({ "decision": "maybe" }))).await;
    assert!(status.is_client_error());
}

#[tokio::test]
async fn resubmission_latest_wins_and_example_shows_it() {
    let app = app(candidates(3));
    call(&app, "POST", "/api/examples/q1/verdict", Some(json!({ "decision": "reject" }))).await;
    let (_, next) = call(&app, "GET", "/api/queue/next", None).await;
    assert_eq!(next["example"]["qa_id"], "q0");
    call(&app, "POST", "/api/examples/q1/verdict", Some(json!({ "decision": "accept" }))).await;
    let (_, ex) = call(&app, "GET", "/api/examples/q1", None).await;
    assert_eq!(ex["verdict"]["decision"], "accept");
    assert_eq!(ex["position"], 1);
    let (_, exported) = call(&app, "GET", "/api/export", None).await;
    let gold: Dataset = serde_json::from_value(exported).unwrap();
    assert_eq!(gold.qas().map(|(_, _, q)| q.id.clone()).collect::<Vec<_>>(), vec!["q1"]);
}

#[tokio::test]
async fn verdicts_persist_across_restart_and_static_files_are_served() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("verdicts.jsonl");
    let assets = dir.path().join("ui");
    std::fs::create_dir(&assets).unwrap();
    std::fs::write(assets.join("index.html"), "<h1>review</h1>").unwrap();

    let open = || {
        let session = ReviewSession::open(candidates(3), &log).unwrap();
        router(Arc::new(RwLock::new(session)), Some(assets.clone()))
    };
    let first = open();
    call(&first, "POST", "/api/examples/q0/verdict", Some(json!({ "decision": "accept" }))).await;
    drop(first);

    let second = open();
    let (_, next) = call(&second, "GET", "/api/queue/next", None).await;
    assert_eq!(next["example"]["qa_id"], "q1");

    let resp = second.clone().oneshot(Request::get("/index.html").body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let html = resp.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&html[..], b"<h1>review</h1>");
}
