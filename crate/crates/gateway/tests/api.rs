use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use econsim::{EpisodeConfig, TrajectoryRecord};
use econsim_gateway::{router, AppState, GatewayConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app_with(config: GatewayConfig) -> Router {
    router(AppState::new(config))
}

fn app() -> Router {
    app_with(GatewayConfig::default())
}

async fn send(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, String) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn send_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, text) = send(app, method, uri, body).await;
    (s, serde_json::from_str(&text).unwrap_or(Value::String(text)))
}

async fn create(app: &Router, body: Value) -> String {
    let (s, v) = send_json(app, "POST", "/sessions", Some(body)).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

async fn act(app: &Router, id: &str, tool: &str, args: Value) -> (StatusCode, Value) {
    send_json(app, "POST", &format!("/sessions/{id}/action"), Some(json!({"tool": tool, "args": args}))).await
}

async fn trace(app: &Router, id: &str) -> Vec<TrajectoryRecord> {
    let (s, text) = send(app, "GET", &format!("/sessions/{id}/trace"), None).await;
    assert_eq!(s, StatusCode::OK);
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[tokio::test]
async fn create_operation_session() {
    let app = app();
    let (s, v) = send_json(&app, "POST", "/sessions", Some(json!({"env": "operation", "seed": 7}))).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(v["budget"], 1);
    assert_eq!(v["day"], 1);
    assert_eq!(v["horizon_days"], 365);
    assert_eq!(v["remaining_budget"], 1);
    assert_eq!(v["terminated"], false);
    assert!(v["first_observation"]["dau"].is_number());
    assert_eq!(v["tools"].as_array().unwrap().len(), 5);
}

#[tokio::test]
async fn bad_creates_are_400() {
    let app = app();
    for body in [
        json!({"env": "casino", "seed": 1}),
        json!({"env": "vending", "seed": 1, "params": {"lead_time": "soon"}}),
        json!({"env": "operation", "seed": 1, "params": {"coefficients": {"kappa": 2.0}}}),
        json!({"env": "freelance", "seed": 1, "horizon_days": 0}),
        json!({"env": "freelance"}),
        json!({"env": "freelance", "seed": 1, "colour": "red"}),
    ] {
        let (s, v) = send_json(&app, "POST", "/sessions", Some(body.clone())).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{body}");
        assert!(v["error"].is_string() && v["message"].is_string());
    }
    let (s, _) = send(&app, "POST", "/sessions", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn same_seed_sessions_are_independent_but_identical() {
    let app = app();
    let a = create(&app, json!({"env": "operation", "seed": 11})).await;
    let b = create(&app, json!({"env": "operation", "seed": 11})).await;
    assert_ne!(a, b);
    let (_, ra) = act(&app, &a, "creator_incentive", json!({})).await;
    let (_, sb) = send_json(&app, "GET", &format!("/sessions/{b}/state"), None).await;
    assert_eq!(sb["remaining_budget"], 1, "acting on one session leaves the other alone");
    let (_, rb) = act(&app, &b, "creator_incentive", json!({})).await;
    assert_eq!(ra["result"], rb["result"]);
    send(&app, "POST", &format!("/sessions/{a}/task_done"), None).await;
    send(&app, "POST", &format!("/sessions/{b}/task_done"), None).await;
    let da: Vec<String> = trace(&app, &a).await.into_iter().map(|r| r.state_digest).collect();
    let db: Vec<String> = trace(&app, &b).await.into_iter().map(|r| r.state_digest).collect();
    assert_eq!(da, db);
}

#[tokio::test]
async fn schema_violation_is_422_and_costs_a_slot() {
    let app = app();
    let id = create(&app, json!({"env": "vending", "seed": 3})).await;
    let (s0, before) = send_json(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(s0, StatusCode::OK);
    let (s, v) = act(&app, &id, "price_set", json!({"product_name": "Cola Can", "price": "1.50"})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "schema_violation");
    assert_eq!(v["remaining_budget"], 3);
    let (_, after) = send_json(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(before["state"], after["state"]);

    let (s, v) = act(&app, &id, "price_set", json!({"product_name": "Cola Can", "price": 1.5, "note": "x"})).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("schema_violation")));
    let (s, v) = act(&app, &id, "teleport", json!({})).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("unknown_tool")));
    assert_eq!(v["remaining_budget"], 1);
}

#[tokio::test]
async fn fifth_vending_action_ends_the_day() {
    let app = app();
    let id = create(&app, json!({"env": "vending", "seed": 3})).await;
    for left in (0..4).rev() {
        let (s, v) = act(&app, &id, "products_research", json!({"query": "cola"})).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(v["remaining_budget"], left);
    }
    let (s, v) = act(&app, &id, "products_research", json!({"query": "cola"})).await;
    assert_eq!(s, StatusCode::TOO_MANY_REQUESTS);
    assert_eq!(v["error"], "budget_exhausted");
    assert_eq!(v["day_advanced"], true);
    assert_eq!(v["day"], 2);
    assert_eq!(v["remaining_budget"], 4);
    assert_eq!(v["daily_report"]["day"], 1);
    let records = trace(&app, &id).await;
    assert_eq!(records.last().unwrap().tool, "task_done");
    assert_eq!(records.last().unwrap().args, json!({"forced": true}));
    assert_eq!(records.iter().filter(|r| r.tool == "products_research").count(), 4);
}

#[tokio::test]
async fn env_errors_are_200_with_error_field() {
    let app = app();
    let id = create(&app, json!({"env": "vending", "seed": 3})).await;
    let (s, v) = act(&app, &id, "order_place", json!({"items": [{"name": "Cola Can", "quantity": 100000}]})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["error"], "insufficient_funds");
    assert_eq!(v["remaining_budget"], 3);
    assert!(v.get("result").is_none());
}

#[tokio::test]
async fn horizon_end_then_409() {
    let app = app();
    let id = create(&app, json!({"env": "operation", "seed": 5, "horizon_days": 2})).await;
    let (s, v) = send_json(&app, "POST", &format!("/sessions/{id}/task_done"), None).await;
    assert_eq!((s, &v["terminated"]), (StatusCode::OK, &json!(false)));
    assert!(v["daily_report"]["dau"].is_number());
    let (_, v) = send_json(&app, "POST", &format!("/sessions/{id}/task_done"), None).await;
    assert_eq!(v["terminated"], true);
    assert_eq!(v["status"]["kind"], "completed_horizon");
    assert!(v["final_metric"].is_number());
    let n = trace(&app, &id).await.len();
    let (s, v) = act(&app, &id, "engagement_tune", json!({})).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::CONFLICT, Some("terminated")));
    let (s, _) = send(&app, "POST", &format!("/sessions/{id}/task_done"), None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(trace(&app, &id).await.len(), n);
}

#[tokio::test]
async fn unknown_session_is_404() {
    let app = app();
    for (m, path) in [
        ("POST", "/sessions/nope/action"),
        ("POST", "/sessions/nope/task_done"),
        ("GET", "/sessions/nope/state"),
        ("GET", "/sessions/nope/trace"),
    ] {
        let body = (m == "POST").then(|| json!({"tool": "tasks_browse"}));
        let (s, v) = send_json(&app, m, path, body).await;
        assert_eq!(s, StatusCode::NOT_FOUND, "{path}");
        assert_eq!(v["error"], "not_found");
    }
}

#[tokio::test]
async fn state_polls_are_stable_and_track_actions() {
    let app = app();
    let id = create(&app, json!({"env": "freelance", "seed": 9})).await;
    let uri = format!("/sessions/{id}/state");
    let (_, a) = send(&app, "GET", &uri, None).await;
    let (_, b) = send(&app, "GET", &uri, None).await;
    assert_eq!(a, b);
    act(&app, &id, "energy_restore", json!({"level": "low"})).await;
    let (_, c) = send_json(&app, "GET", &uri, None).await;
    assert_eq!(c["remaining_budget"], 4);
    assert_eq!(c["state"]["money"], 95.0);
}

#[tokio::test]
async fn trace_counts_and_replays() {
    let app = app();
    let id = create(&app, json!({"env": "freelance", "seed": 9, "horizon_days": 30})).await;
    assert_eq!(trace(&app, &id).await.len(), 1);
    act(&app, &id, "tasks_browse", json!({})).await;
    act(&app, &id, "tasks_discover", json!({"refresh_type": "free"})).await;
    act(&app, &id, "task_inspect", json!({"task_id": "T99999"})).await;
    send(&app, "POST", &format!("/sessions/{id}/task_done"), None).await;
    act(&app, &id, "energy_restore", json!({"level": "medium"})).await;
    let records = trace(&app, &id).await;
    assert_eq!(records.len(), 1 + 4 + 1);
    let config = EpisodeConfig::new(econsim::EnvKind::Freelance, 9).with_horizon(30);
    let (_, mismatch) = econsim::Episode::replay(config, &records).unwrap();
    assert_eq!(mismatch, None);
}

#[tokio::test]
async fn trace_file_mirrors_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_with(GatewayConfig {
        trace_dir: Some(dir.path().to_path_buf()),
        ..GatewayConfig::default()
    });
    let id = create(&app, json!({"env": "operation", "seed": 2})).await;
    act(&app, &id, "acquisition_boost", json!({})).await;
    act(&app, &id, "acquisition_boost", json!({})).await;
    send(&app, "POST", &format!("/sessions/{id}/task_done"), None).await;
    let (_, body) = send(&app, "GET", &format!("/sessions/{id}/trace"), None).await;
    let file = std::fs::read_to_string(dir.path().join(format!("{id}.jsonl"))).unwrap();
    assert_eq!(file, body);
    assert_eq!(file.lines().count(), 4);
}

#[tokio::test]
async fn idle_sessions_expire() {
    let app = app_with(GatewayConfig {
        ttl: Duration::from_millis(1),
        ..GatewayConfig::default()
    });
    let id = create(&app, json!({"env": "operation", "seed": 2})).await;
    tokio::time::sleep(Duration::from_millis(20)).await;
    let (s, _) = send(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_requests_are_serialized() {
    let app = app();
    let id = create(&app, json!({"env": "freelance", "seed": 4})).await;
    let handles: Vec<_> = (0..24)
        .map(|_| {
            let app = app.clone();
            let id = id.clone();
            tokio::spawn(async move { act(&app, &id, "tasks_browse", json!({})).await.0 })
        })
        .collect();
    let mut statuses = Vec::new();
    for h in handles {
        statuses.push(h.await.unwrap());
    }
    // every sixth call lands on an exhausted budget and closes the day
    assert_eq!(statuses.iter().filter(|s| **s == StatusCode::TOO_MANY_REQUESTS).count(), 4);
    let records = trace(&app, &id).await;
    assert_eq!(records.len(), 1 + 24);
    for w in records.windows(2) {
        assert_eq!(w[1].step, w[0].step + 1);
    }
    for day in 1..=4 {
        let n = records.iter().filter(|r| r.day == day && r.tool == "tasks_browse").count();
        assert_eq!(n, 5);
    }
}
