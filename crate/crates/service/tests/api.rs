use std::fs;
use std::path::Path;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use framebias_core::survey::{
    ComparisonConfig, NextPair, Role, Summary, SurveyConfig, SurveyEngine,
};
use framebias_service::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn stimuli(dir: &Path, name: &str, marker: u8) -> std::path::PathBuf {
    let d = dir.join(name);
    fs::create_dir_all(&d).unwrap();
    for i in 0..3 {
        fs::write(d.join(format!("{i:05}.png")), [marker, i as u8]).unwrap();
    }
    d
}

fn config(dir: &Path) -> SurveyConfig {
    let comparisons = [("25v22", 22), ("25v20", 20), ("25v15", 15)]
        .iter()
        .map(|&(label, lo)| ComparisonConfig {
            label: label.into(),
            higher_fps: 25,
            lower_fps: lo,
            higher_stimulus: stimuli(dir, &format!("overlay/25-{lo}"), 25),
            lower_stimulus: stimuli(dir, &format!("overlay/{lo}"), lo as u8),
        })
        .collect();
    SurveyConfig {
        seed: 42,
        store: dir.join("responses.jsonl"),
        ui_dir: None,
        frame_interval_ms: 40,
        comparisons,
    }
}

fn app(cfg: &SurveyConfig) -> Router {
    router(
        AppState::new(SurveyEngine::from_config(cfg).unwrap()),
        cfg.ui_dir.clone(),
    )
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp
        .into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes()
        .to_vec();
    (status, bytes)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Vec<u8>) {
    call(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post(app: &Router, body: Value) -> (StatusCode, Value) {
    let req = Request::post("/api/responses")
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let (s, b) = call(app, req).await;
    (s, serde_json::from_slice(&b).unwrap())
}

async fn next(app: &Router, session: &str) -> (String, Value) {
    let (s, b) = get(app, &format!("/api/pairs/next?session={session}")).await;
    assert_eq!(s, StatusCode::OK);
    let v: Value = serde_json::from_slice(&b).unwrap();
    (String::from_utf8(b).unwrap(), v)
}

fn response(pair: &str, session: &str, role: &str, choice: &str) -> Value {
    json!({"pair_id": pair, "session": session, "role": role, "choice": choice})
}

#[tokio::test]
async fn session_gets_every_pair_then_completes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let app = app(&cfg);
    let mut seen = Vec::new();
    for _ in 0..3 {
        let (_, v) = next(&app, "alice").await;
        assert_eq!(v["status"], "pair");
        let pair = v["pair"]["pair_id"].as_str().unwrap().to_owned();
        assert!(!seen.contains(&pair));
        let (s, ack) = post(&app, response(&pair, "alice", "surgeon", "first")).await;
        assert_eq!(s, StatusCode::CREATED, "{ack}");
        assert_eq!(ack["pair_id"], pair.as_str());
        seen.push(pair);
    }
    let (_, v) = next(&app, "alice").await;
    assert_eq!(v["status"], "complete");
    assert_eq!(v["progress"]["answered"], 3);
    assert_eq!(fs::read_to_string(&cfg.store).unwrap().lines().count(), 3);
}

#[tokio::test]
async fn payload_is_blinded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let app = app(&cfg);
    let (raw, v) = next(&app, "bob").await;
    assert!(!raw.to_lowercase().contains("fps"));
    for c in &cfg.comparisons {
        assert!(!raw.contains(&c.label));
        assert!(!raw.contains(&*c.higher_stimulus.to_string_lossy()));
        assert!(!raw.contains(&*c.lower_stimulus.to_string_lossy()));
    }
    let pair: NextPair = serde_json::from_value(v).unwrap();
    let NextPair::Pair { pair, .. } = pair else {
        panic!()
    };
    for url in [&pair.first.url, &pair.second.url] {
        for fps in ["25", "22", "20", "15"] {
            assert!(!url.contains(fps), "{url}");
        }
    }
    let (s, ack) = post(&app, response(&pair.pair_id, "bob", "nurse", "either")).await;
    assert_eq!(s, StatusCode::CREATED);
    let ack = ack.to_string();
    assert!(!ack.contains("side") && !ack.contains("fps") && !ack.contains("25v"));
}

#[tokio::test]
async fn stimuli_follow_server_side_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let app = app(&cfg);
    let engine = SurveyEngine::from_config(&cfg).unwrap();
    let (_, v) = next(&app, "carol").await;
    let pair_id = v["pair"]["pair_id"].as_str().unwrap();
    let first_url = v["pair"]["first"]["url"].as_str().unwrap();
    let (s, body) = get(&app, &format!("{first_url}00001.png")).await;
    assert_eq!(s, StatusCode::OK);
    let cmp = engine.comparison(pair_id).unwrap();
    let expected_marker = match engine.higher_side("carol", pair_id) {
        framebias_core::survey::Side::First => 25,
        framebias_core::survey::Side::Second => cmp.lower_fps as u8,
    };
    assert_eq!(body, vec![expected_marker, 1]);

    assert_eq!(
        get(&app, &format!("{first_url}00009.png")).await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        get(&app, &format!("{first_url}..%2Fsecret")).await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        get(&app, "/stimuli/carol/pair-a/c/00000.png").await.0,
        StatusCode::NOT_FOUND
    );
}

#[tokio::test]
async fn rejects_bad_responses() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let app = app(&cfg);
    let (s, body) = post(&app, response("pair-a", "dan", "nurse", "maybe")).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(body["error"].as_str().unwrap().contains("maybe"));
    assert_eq!(
        post(&app, response("pair-a", "dan", "intern", "first"))
            .await
            .0,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(
        post(&app, response("pair-zz", "dan", "nurse", "first"))
            .await
            .0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        post(&app, json!({"pair_id": "pair-a"})).await.0,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(
        post(&app, response("pair-a", "dan", "nurse", "first"))
            .await
            .0,
        StatusCode::CREATED
    );
    assert_eq!(
        post(&app, response("pair-a", "dan", "nurse", "second"))
            .await
            .0,
        StatusCode::CONFLICT
    );
    assert_eq!(
        get(&app, "/api/pairs/next").await.0,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(fs::read_to_string(&cfg.store).unwrap().lines().count(), 1);
}

#[tokio::test]
async fn summary_counts_by_role() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let app = app(&cfg);
    let (s, body) = get(&app, "/api/summary").await;
    assert_eq!(s, StatusCode::OK);
    let empty: Summary = serde_json::from_slice(&body).unwrap();
    assert_eq!(empty.total, 0);
    assert_eq!(empty.comparisons.len(), 3);

    let engine = SurveyEngine::from_config(&cfg).unwrap();
    for (session, role) in [("e1", "engineer"), ("e2", "engineer"), ("s1", "surgeon")] {
        // always pick whichever side shows the higher rate
        let choice = match engine.higher_side(session, "pair-c") {
            framebias_core::survey::Side::First => "first",
            framebias_core::survey::Side::Second => "second",
        };
        assert_eq!(
            post(&app, response("pair-c", session, role, choice))
                .await
                .0,
            StatusCode::CREATED
        );
    }
    let (_, body) = get(&app, "/api/summary").await;
    let summary: Summary = serde_json::from_slice(&body).unwrap();
    assert_eq!(summary.total, 3);
    let label = &engine.comparison("pair-c").unwrap().label;
    assert_eq!(summary.comparisons[label][&Role::Engineer].higher_fps, 2);
    assert_eq!(summary.comparisons[label][&Role::Surgeon].higher_fps, 1);
    assert_eq!(summary.comparisons[label][&Role::Nurse].total(), 0);
}

#[tokio::test]
async fn serves_ui_directory_as_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    let ui = dir.path().join("ui");
    fs::create_dir_all(&ui).unwrap();
    fs::write(ui.join("index.html"), "<html>survey</html>").unwrap();
    cfg.ui_dir = Some(ui);
    let app = app(&cfg);
    let (s, body) = get(&app, "/index.html").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body, b"<html>survey</html>");
    assert_eq!(get(&app, "/health").await.1, b"ok");
}

#[tokio::test]
async fn restart_keeps_order_and_progress() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let first = app(&cfg);
    let (raw_before, v) = next(&first, "erin").await;
    let pair = v["pair"]["pair_id"].as_str().unwrap().to_owned();
    drop(first);

    let second = app(&cfg);
    let (raw_again, _) = next(&second, "erin").await;
    assert_eq!(raw_before, raw_again);
    assert_eq!(
        post(&second, response(&pair, "erin", "nurse", "second"))
            .await
            .0,
        StatusCode::CREATED
    );
    drop(second);

    let third = app(&cfg);
    let (_, v) = next(&third, "erin").await;
    assert_eq!(v["progress"]["answered"], 1);
    assert_ne!(v["pair"]["pair_id"], pair.as_str());
    assert_eq!(
        post(&third, response(&pair, "erin", "nurse", "first"))
            .await
            .0,
        StatusCode::CONFLICT
    );
}
