use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use tableau_core::llm::prompts::{build_caption_prompt, build_prediction_prompt, build_state_edit_prompt};
use tableau_core::llm::{Completion, InstructionClass, MockProvider, Provider, ProviderError};
use tableau_core::llm::prompts::PromptBundle;
use tableau_core::{demo, Timeline};
use tableau_service::{router, AppState, Engine};

fn app_with(provider: Arc<dyn Provider>) -> Router {
    router(AppState::new(Engine::new(demo::all(), provider, None)))
}

fn app() -> Router {
    app_with(Arc::new(MockProvider::new()))
}

async fn send(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, _, bytes) = send_raw(app, method, uri, body.map(|b| b.to_string())).await;
    let v = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, v)
}

async fn send_raw(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<String>,
) -> (StatusCode, String, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header(header::CONTENT_TYPE, "application/json");
    }
    let req = req.body(body.map(Body::from).unwrap_or_else(Body::empty)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let ct = resp
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
        .to_string();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, ct, bytes)
}

async fn create(app: &Router, bundle: &str) -> (String, u64) {
    let (st, v) = send(app, Method::POST, "/sessions", Some(json!({ "bundle": bundle }))).await;
    assert_eq!(st, StatusCode::CREATED, "{v}");
    (v["id"].as_str().unwrap().to_string(), v["revision"].as_u64().unwrap())
}

fn drag(object: &str, x: f64, y: f64) -> Value {
    json!({ "type": "drag", "object": object, "x": x, "y": y })
}

#[tokio::test]
async fn create_session_has_one_step() {
    let app = app();
    let (st, v) = send(&app, Method::POST, "/sessions", Some(json!({ "bundle": "kitchen" }))).await;
    assert_eq!(st, StatusCode::CREATED);
    assert_eq!(v["steps"].as_array().unwrap().len(), 1);
    assert_eq!(v["selected"], 0);
    assert_eq!(v["environment"]["fixtures"]["stove"], json!(["off", "low", "high"]));
    let (st, list) = send(&app, Method::GET, "/bundles", None).await;
    assert_eq!(st, StatusCode::OK);
    assert!(list.as_array().unwrap().contains(&json!("sorting_fruits")));
}

#[tokio::test]
async fn conflicting_events_second_is_rejected() {
    let app = app();
    let (id, rev) = create(&app, "kitchen").await;
    let uri = format!("/sessions/{id}/events");
    let (st, v) = send(&app, Method::POST, &uri, Some(json!({ "revision": rev, "event": drag("orange", 400.0, 300.0) }))).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["length"], 2);
    let after = v["revision"].as_u64().unwrap();
    assert!(after > rev);

    let (st, e) = send(&app, Method::POST, &uri, Some(json!({ "revision": rev, "event": { "type": "toggle", "fixture": "cabinet" } }))).await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert_eq!(e["code"], "RevisionConflict");
    assert_eq!(e["detail"]["actual"], after);

    let (_, s) = send(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(s["revision"], after);
    assert_eq!(s["steps"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn failed_event_changes_nothing() {
    let app = app();
    let (id, rev) = create(&app, "kitchen").await;
    let (st, e) = send(
        &app,
        Method::POST,
        &format!("/sessions/{id}/events"),
        Some(json!({ "revision": rev, "event": drag("pineapple", 1.0, 1.0) })),
    )
    .await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(e["code"], "ValidationFailed");
    let (_, s) = send(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(s["revision"], rev);
    assert_eq!(s["steps"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn error_bodies() {
    let app = app();
    let (st, e) = send(&app, Method::GET, "/sessions/nope", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert_eq!(e["code"], "NotFound");
    assert_eq!(e["detail"]["id"], "nope");

    let (st, _, bytes) = send_raw(&app, Method::POST, "/sessions", Some("{not json".into())).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let e: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(e["code"], "BadRequest");

    let (st, e) = send(&app, Method::POST, "/sessions", Some(json!({ "bundle": "atlantis" }))).await;
    assert_eq!(st, StatusCode::NOT_FOUND, "{e}");

    let (st, e) = send(&app, Method::GET, "/no/such/route", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert_eq!(e["code"], "NotFound");

    // classification falls back to the keyword rule, the edit has no transcript
    let (id, _) = create(&app, "kitchen").await;
    let (st, e) = send(&app, Method::POST, &format!("/sessions/{id}/instruct"), Some(json!({ "text": "open the cabinet" }))).await;
    assert_eq!(st, StatusCode::BAD_GATEWAY, "{e}");
    assert_eq!(e["code"], "ProviderError");
}

#[tokio::test]
async fn archive_round_trip() {
    let app = app();
    let (id, rev) = create(&app, "kitchen").await;
    let ev = format!("/sessions/{id}/events");
    let (_, v) = send(&app, Method::POST, &ev, Some(json!({ "revision": rev, "event": drag("orange", 400.0, 300.0) }))).await;
    let (_, v) = send(&app, Method::POST, &ev, Some(json!({ "revision": v["revision"], "event": { "type": "toggle", "fixture": "stove" } }))).await;
    assert_eq!(v["length"], 3);

    let (st, archive) = send(&app, Method::GET, &format!("/sessions/{id}/archive"), None).await;
    assert_eq!(st, StatusCode::OK);

    let (other, other_rev) = create(&app, "kitchen").await;
    let (st, loaded) = send(&app, Method::PUT, &format!("/sessions/{other}/archive"), Some(archive.clone())).await;
    assert_eq!(st, StatusCode::OK, "{loaded}");
    assert!(loaded["revision"].as_u64().unwrap() > other_rev);

    let (_, a) = send(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    let (_, b) = send(&app, Method::GET, &format!("/sessions/{other}"), None).await;
    assert_eq!(a["steps"], b["steps"]);

    let (st, e) = send(&app, Method::PUT, &format!("/sessions/{other}/archive"), Some(json!({ "format": "x" }))).await;
    assert!(st.is_client_error(), "{e}");
    let (st, e) = create_and_put_wrong_bundle(&app, archive).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY, "{e}");
}

async fn create_and_put_wrong_bundle(app: &Router, archive: Value) -> (StatusCode, Value) {
    let (id, _) = create(app, "red_apple").await;
    send(app, Method::PUT, &format!("/sessions/{id}/archive"), Some(archive)).await
}

#[tokio::test]
async fn scene_documents() {
    let app = app();
    let (id, rev) = create(&app, "kitchen").await;
    send(&app, Method::POST, &format!("/sessions/{id}/events"), Some(json!({ "revision": rev, "event": drag("orange", 400.0, 300.0) }))).await;

    let (st, ct, svg) = send_raw(&app, Method::GET, &format!("/sessions/{id}/scene/1?width=320"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(ct, "image/svg+xml");
    let svg = String::from_utf8(svg).unwrap();
    assert!(svg.contains("<svg"), "{svg}");

    let (st, doc) = send(&app, Method::GET, &format!("/sessions/{id}/scene/1?mode=diff&format=json"), None).await;
    assert_eq!(st, StatusCode::OK, "{doc}");
    assert!(doc.to_string().contains("orange"));

    let (st, _) = send(&app, Method::GET, &format!("/sessions/{id}/scene/9"), None).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    let (st, _) = send(&app, Method::GET, &format!("/sessions/{id}/scene/0?mode=sideways"), None).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
}

async fn load_oracle(app: &Router, bundle: &str) -> String {
    let b = demo::all().into_iter().find(|b| b.id == bundle).unwrap();
    let archive: Value = serde_json::from_str(&b.oracle.unwrap().to_text()).unwrap();
    let (id, _) = create(app, bundle).await;
    let (st, v) = send(app, Method::PUT, &format!("/sessions/{id}/archive"), Some(archive)).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    id
}

#[tokio::test]
async fn translate_red_apple() {
    let app = app();
    let id = load_oracle(&app, "red_apple").await;
    let (st, v) = send(&app, Method::POST, &format!("/sessions/{id}/translate"), Some(json!({ "path": "rule" }))).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    let program = v["program"].as_str().unwrap();
    let calls: Vec<&str> = program.lines().map(|l| l.split("  #").next().unwrap()).collect();
    assert_eq!(calls, ["pick(\"red apple\")", "place(\"white bowl\")"]);
    assert_eq!(v["report"]["issues"], json!([]));

    let (st, e) = send(&app, Method::POST, &format!("/sessions/{id}/translate"), Some(json!({ "path": "llm" }))).await;
    assert_eq!(st, StatusCode::BAD_GATEWAY, "{e}");
}

#[tokio::test]
async fn judge_against_own_oracle_is_clean() {
    let app = app();
    let id = load_oracle(&app, "faucet").await;
    let (st, r) = send(&app, Method::POST, "/judge", Some(json!({ "session": id }))).await;
    assert_eq!(st, StatusCode::OK, "{r}");
    assert_eq!(r["missing"]["count"], 0);
    assert_eq!(r["extraneous"]["count"], 0);
    assert_eq!(r["inefficient"]["count"], 0);

    // an empty session misses all three oracle steps
    let (fresh, _) = create(&app, "faucet").await;
    let (_, r) = send(&app, Method::POST, "/judge", Some(json!({ "session": fresh, "oracle": "faucet" }))).await;
    assert_eq!(r["missing"]["count"], 3);
}

fn kitchen_mock(predictions: &str) -> MockProvider {
    let b = demo::kitchen();
    let env = &b.environment;
    let tl = Timeline::new(env, &b.initial_state).unwrap();
    let s = &tl.states()[0];
    let mut m = MockProvider::new();
    m.register_for(&build_prediction_prompt(env, &tl.states()), predictions);
    m.register_for(
        &build_state_edit_prompt(env, s, InstructionClass::FixtureStateChange, "open the cabinet"),
        "[{'fixtures': {'cabinet': 'open'}}]",
    );
    m.register_for(
        &build_state_edit_prompt(env, s, InstructionClass::ObjectManipulation, "put the orange in the bowl"),
        "[{'objects': {'orange': {'x': 325, 'y': 210}}}]",
    );
    m
}

const TWO_PREDICTIONS: &str = "[{'action': 'open the cabinet', 'change_needed': 'Change background'},
  {'action': 'put the orange in the bowl', 'change_needed': 'Move objects'}]";

#[tokio::test]
async fn predict_reject_accept() {
    let app = app_with(Arc::new(kitchen_mock(TWO_PREDICTIONS)));
    let (id, _) = create(&app, "kitchen").await;
    let (st, p) = send(&app, Method::POST, &format!("/sessions/{id}/predict"), None).await;
    assert_eq!(st, StatusCode::OK, "{p}");
    assert_eq!(p["items"].as_array().unwrap().len(), 2);

    let (st, p) = send(&app, Method::POST, &format!("/sessions/{id}/proposals/0/reject"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(p["items"].as_array().unwrap().len(), 1);
    let (st, _) = send(&app, Method::POST, &format!("/sessions/{id}/proposals/0/accept"), None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);

    let (st, r) = send(&app, Method::POST, &format!("/sessions/{id}/proposals/1/accept"), None).await;
    assert_eq!(st, StatusCode::OK, "{r}");
    assert_eq!(r["length"], 2);
    assert_eq!(r["steps"][0]["provenance"], "predicted");
    assert_eq!(r["steps"][0]["caption"], "put the orange in the bowl");

    // proposals are consumed by an accept
    let (st, _) = send(&app, Method::POST, &format!("/sessions/{id}/proposals/1/accept"), None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn stale_proposal_is_conflict() {
    let app = app_with(Arc::new(kitchen_mock(TWO_PREDICTIONS)));
    let (id, _) = create(&app, "kitchen").await;
    send(&app, Method::POST, &format!("/sessions/{id}/predict"), None).await;
    let (_, s) = send(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    send(&app, Method::POST, &format!("/sessions/{id}/events"), Some(json!({ "revision": s["revision"], "event": drag("apple", 10.0, 10.0) }))).await;
    let (st, e) = send(&app, Method::POST, &format!("/sessions/{id}/proposals/0/accept"), None).await;
    assert_eq!(st, StatusCode::CONFLICT, "{e}");
    assert_eq!(e["code"], "StaleProposal");
}

#[tokio::test]
async fn instruct_creates_step() {
    let app = app_with(Arc::new(kitchen_mock(TWO_PREDICTIONS)));
    let (id, rev) = create(&app, "kitchen").await;
    let (st, r) = send(&app, Method::POST, &format!("/sessions/{id}/instruct"), Some(json!({ "text": "open the cabinet", "revision": rev }))).await;
    assert_eq!(st, StatusCode::OK, "{r}");
    assert_eq!(r["length"], 2);
    assert_eq!(r["steps"][0]["provenance"], "language");
    assert_eq!(r["steps"][0]["state"]["fixtures"]["cabinet"]["state"], "open");

    let (st, e) = send(&app, Method::POST, &format!("/sessions/{id}/instruct"), Some(json!({ "text": "open the cabinet", "revision": rev }))).await;
    assert_eq!(st, StatusCode::CONFLICT, "{e}");
}

#[tokio::test]
async fn unlinked_caption_edit() {
    let app = app();
    let (id, rev) = create(&app, "kitchen").await;
    send(&app, Method::POST, &format!("/sessions/{id}/events"), Some(json!({ "revision": rev, "event": drag("orange", 400.0, 300.0) }))).await;
    let (st, r) = send(&app, Method::PATCH, &format!("/sessions/{id}/steps/1/caption"), Some(json!({ "text": "move the orange", "linked": false }))).await;
    assert_eq!(st, StatusCode::OK, "{r}");
    assert_eq!(r["steps"][0]["caption"], "move the orange");
    assert_eq!(r["steps"][0]["linked"], false);
    let (st, _) = send(&app, Method::PATCH, &format!("/sessions/{id}/steps/0/caption"), Some(json!({ "text": "x", "linked": false }))).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn goals_and_accept() {
    let app = app();
    let (id, rev) = create(&app, "kitchen").await;
    let (st, g) = send(&app, Method::GET, &format!("/sessions/{id}/goals/orange"), None).await;
    assert_eq!(st, StatusCode::OK, "{g}");
    assert_eq!(g["candidates"].as_array().unwrap().len(), 2);
    let (st, r) = send(&app, Method::POST, &format!("/sessions/{id}/goals/orange/accept"), Some(json!({ "index": 0, "revision": rev }))).await;
    assert_eq!(st, StatusCode::OK, "{r}");
    assert_eq!(r["length"], 2);
    let (st, _) = send(&app, Method::POST, &format!("/sessions/{id}/goals/orange/accept"), Some(json!({ "index": 7 }))).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    let (st, _) = send(&app, Method::GET, &format!("/sessions/{id}/goals/stove"), None).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn drag_is_captioned_in_background() {
    let b = demo::kitchen();
    let env = &b.environment;
    let tl = Timeline::new(env, &b.initial_state).unwrap();
    let after = tl.record_drag(env, "orange", 400.0, 300.0).unwrap();
    let mut m = MockProvider::new();
    m.register_for(
        &build_caption_prompt(env, &after.states()[0], &after.states()[1]),
        "[Instruction] Move the orange to the right of the bowl.",
    );
    let app = app_with(Arc::new(m));
    let (id, rev) = create(&app, "kitchen").await;
    let (_, r) = send(&app, Method::POST, &format!("/sessions/{id}/events"), Some(json!({ "revision": rev, "event": drag("orange", 400.0, 300.0) }))).await;
    let committed = r["revision"].clone();
    let mut caption = Value::Null;
    for _ in 0..100 {
        let (_, s) = send(&app, Method::GET, &format!("/sessions/{id}"), None).await;
        caption = s["steps"][1]["caption"].clone();
        if caption != "" {
            assert_eq!(s["revision"], committed);
            break;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    assert_eq!(caption, "Move the orange to the right of the bowl.");
}

struct Slow(MockProvider);

impl Provider for Slow {
    fn complete(&self, prompt: &PromptBundle) -> Result<Completion, ProviderError> {
        std::thread::sleep(Duration::from_millis(150));
        self.0.complete(prompt)
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn slow_provider_becomes_job() {
    let engine = Engine::new(demo::all(), Arc::new(Slow(kitchen_mock(TWO_PREDICTIONS))), None);
    let app = router(AppState::with_pending_after(engine, Duration::from_millis(20)));
    let (id, _) = create(&app, "kitchen").await;
    let (st, j) = send(&app, Method::POST, &format!("/sessions/{id}/predict"), None).await;
    assert_eq!(st, StatusCode::ACCEPTED, "{j}");
    assert_eq!(j["status"], "pending");
    let job = j["jobId"].as_str().unwrap().to_string();
    let mut last = Value::Null;
    for _ in 0..200 {
        let (st, v) = send(&app, Method::GET, &format!("/jobs/{job}"), None).await;
        assert_eq!(st, StatusCode::OK);
        last = v;
        if last["status"] != "pending" {
            break;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    assert_eq!(last["status"], "done", "{last}");
    assert_eq!(last["result"]["items"].as_array().unwrap().len(), 2);
    let (st, _) = send(&app, Method::GET, "/jobs/unknown", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn sessions_persist_in_data_dir() {
    let dir = tempfile::tempdir().unwrap();
    let engine = Engine::new(demo::all(), Arc::new(MockProvider::new()), Some(dir.path().to_path_buf()));
    let app = router(AppState::new(engine));
    let (id, rev) = create(&app, "kitchen").await;
    send(&app, Method::POST, &format!("/sessions/{id}/events"), Some(json!({ "revision": rev, "event": drag("orange", 400.0, 300.0) }))).await;
    let (_, before) = send(&app, Method::GET, &format!("/sessions/{id}"), None).await;

    let restarted = router(AppState::new(Engine::new(
        demo::all(),
        Arc::new(MockProvider::new()),
        Some(dir.path().to_path_buf()),
    )));
    let (st, after) = send(&restarted, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(before["steps"], after["steps"]);
    assert_eq!(before["revision"], after["revision"]);
}
