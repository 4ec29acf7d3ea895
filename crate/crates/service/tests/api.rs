use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;

use epal_core::bench::SpinCoatSurrogate;
use epal_core::campaign::{Campaign, CampaignConfig};
use epal_service::{router, AppState};

struct Fixture {
    _dir: tempfile::TempDir,
    path: PathBuf,
    state: Arc<AppState>,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("campaign.json");
        let campaign = Campaign::new(CampaignConfig::default(), 11).unwrap();
        campaign.save(&path).unwrap();
        let state = AppState::open(&path).unwrap();
        Self { _dir: dir, path, state }
    }

    fn app(&self) -> Router {
        router(self.state.clone())
    }

    fn bytes(&self) -> Vec<u8> {
        std::fs::read(&self.path).unwrap()
    }

    async fn measure_suggestions(&self) {
        let s = self.state.snapshot();
        let surrogate = SpinCoatSurrogate::default();
        for id in s.suggestions.clone() {
            let (h, ie) = surrogate.measure(&s.points[id], 11);
            let (code, _) = call(
                self.app(),
                "POST",
                "/measurements",
                json!({"point_id": id, "hardness": h, "inverse_elasticity": ie}).to_string(),
            )
            .await;
            assert_eq!(code, StatusCode::OK);
        }
    }
}

async fn call(app: Router, method: &str, uri: &str, body: impl Into<Body>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.into())
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

#[tokio::test]
async fn fresh_status() {
    let f = Fixture::new();
    let (code, v) = call(f.app(), "GET", "/status", Body::empty()).await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(v["converged"], false);
    assert_eq!(v["sampled"], 0);
    assert_eq!(v["grid_size"], 1375);
    assert_eq!(v["counts"]["undecided"], 1375);
    assert_eq!(v["suggestions"].as_array().unwrap().len(), 3);
}

#[tokio::test]
async fn unknown_point_measurement_is_404_and_changes_nothing() {
    let f = Fixture::new();
    let before = f.bytes();
    let body = json!({"point_id": 5000, "hardness": 0.5, "inverse_elasticity": 0.1}).to_string();
    let (code, v) = call(f.app(), "POST", "/measurements", body).await;
    assert_eq!(code, StatusCode::NOT_FOUND);
    assert!(v["error"].as_str().unwrap().contains("5000"));
    assert_eq!(f.bytes(), before);
    assert_eq!(f.state.snapshot().measurements.len(), 0);
}

#[tokio::test]
async fn malformed_bodies_are_400() {
    let f = Fixture::new();
    let before = f.bytes();
    for (uri, body) in [
        ("/measurements", "{not json"),
        ("/measurements", r#"{"point_id": 1}"#),
        ("/measurements", r#"{"point_id": 1, "hardness": -1.0, "inverse_elasticity": 0.1}"#),
        ("/override", r#"{"point_id": "seven"}"#),
        ("/override", r#"{}"#),
        ("/step", "[1,"),
    ] {
        let (code, _) = call(f.app(), "POST", uri, body).await;
        assert_eq!(code, StatusCode::BAD_REQUEST, "{uri} {body}");
    }
    assert_eq!(f.bytes(), before);
}

#[tokio::test]
async fn measurement_is_persisted() {
    let f = Fixture::new();
    let body = json!({"point_id": 7, "hardness": 0.5, "inverse_elasticity": 0.1, "note": "first film"}).to_string();
    let (code, v) = call(f.app(), "POST", "/measurements", body).await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(v["sampled"], 1);
    let disk = Campaign::load(&f.path).unwrap();
    assert_eq!(&disk, f.state.snapshot().as_ref());
    assert_eq!(disk.measurements[0].note, "first film");
}

#[tokio::test]
async fn override_by_coordinates_is_logged_and_targeted() {
    let f = Fixture::new();
    let coords = [0.0, 1.0 / 9.0, 8.0 / 9.0, 8000.0, 0.0];
    let (code, v) = call(f.app(), "POST", "/override", json!({ "coordinates": coords }).to_string()).await;
    assert_eq!(code, StatusCode::OK);
    let id = v["point_id"].as_u64().unwrap() as usize;
    let c = f.state.snapshot();
    let p = &c.points[id];
    assert_eq!((p.c_pvp10, p.spin_speed, p.dilution), (0.0, 8000.0, 0.0));
    assert!((p.c_pvp40 - 1.0 / 9.0).abs() < 1e-9);
    assert_eq!(v["suggestions"][0].as_u64(), Some(id as u64));

    let (_, log) = call(f.app(), "GET", "/log", Body::empty()).await;
    let last = log["entries"].as_array().unwrap().last().unwrap();
    assert_eq!(last["event"], "override");
    assert_eq!(last["point_id"].as_u64(), Some(id as u64));

    let (_, s) = call(f.app(), "GET", "/suggestions", Body::empty()).await;
    assert_eq!(s["points"][0]["id"].as_u64(), Some(id as u64));
    assert_eq!(s["override_target"].as_u64(), Some(id as u64));
}

#[tokio::test]
async fn override_errors() {
    let f = Fixture::new();
    let (code, _) = call(f.app(), "POST", "/override", r#"{"point_id": 99999}"#).await;
    assert_eq!(code, StatusCode::NOT_FOUND);
    let (code, _) = call(
        f.app(),
        "POST",
        "/override",
        json!({"coordinates": [0.3, 0.3, 0.4, 8000.0, 0.0]}).to_string(),
    )
    .await;
    assert_eq!(code, StatusCode::NOT_FOUND);

    let body = json!({"point_id": 3, "hardness": 0.5, "inverse_elasticity": 0.1}).to_string();
    call(f.app(), "POST", "/measurements", body).await;
    let before = f.bytes();
    let (code, _) = call(f.app(), "POST", "/override", r#"{"point_id": 3}"#).await;
    assert_eq!(code, StatusCode::BAD_REQUEST);
    assert_eq!(f.bytes(), before);
}

#[tokio::test]
async fn step_without_measurements_is_rejected() {
    let f = Fixture::new();
    let before = f.bytes();
    let (code, _) = call(f.app(), "POST", "/step", Body::empty()).await;
    assert_eq!(code, StatusCode::BAD_REQUEST);
    assert_eq!(f.bytes(), before);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn step_round_trip_and_conflict() {
    let f = Fixture::new();
    f.measure_suggestions().await;

    let (a, b) = tokio::join!(
        call(f.app(), "POST", "/step", Body::empty()),
        call(f.app(), "POST", "/step", Body::empty()),
    );
    let mut codes = [a.0, b.0];
    codes.sort();
    assert_eq!(codes, [StatusCode::OK, StatusCode::CONFLICT]);
    let ok = if a.0 == StatusCode::OK { a.1 } else { b.1 };
    assert_eq!(ok["iteration"], 1);
    assert_eq!(ok["embedding_refreshed"], true);

    let (_, status) = call(f.app(), "GET", "/status", Body::empty()).await;
    assert_eq!(status["iteration"], 1);
    assert_eq!(status["report_digest"], ok["report_digest"]);
    let counts = &status["counts"];
    let total: u64 = ["pareto_optimal", "discarded", "undecided"]
        .iter()
        .map(|k| counts[k].as_u64().unwrap())
        .sum();
    assert_eq!(total, 1375);

    let (_, points) = call(f.app(), "GET", "/points", Body::empty()).await;
    let points = points.as_array().unwrap();
    assert_eq!(points.len(), 1375);
    assert!(points.iter().all(|p| p["mean"].is_array() && p["region_width"].is_array()));
    assert_eq!(points.iter().filter(|p| p["sampled"] == true).count(), 3);

    let (code, report) = call(f.app(), "GET", "/report", Body::empty()).await;
    assert_eq!(code, StatusCode::OK);
    assert!(report["markdown"].as_str().unwrap().starts_with('#'));
    assert!(report["records"].is_array());

    let (code, emb) = call(f.app(), "GET", "/embedding", Body::empty()).await;
    assert_eq!(code, StatusCode::OK);
    let recs = emb["records"].as_array().unwrap();
    assert_eq!(recs.len(), 1375);
    assert_eq!(recs[42]["id"], 42);

    assert_eq!(&Campaign::load(&f.path).unwrap(), f.state.snapshot().as_ref());
}

#[tokio::test]
async fn embedding_before_first_step_is_cached() {
    let f = Fixture::new();
    assert!(f.state.snapshot().embedding.is_none());
    let (code, v) = call(f.app(), "GET", "/embedding", Body::empty()).await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(v["records"].as_array().unwrap().len(), 1375);
    assert!(f.state.snapshot().embedding.is_some());
    assert!(Campaign::load(&f.path).unwrap().embedding.is_some());
}

#[tokio::test]
async fn unknown_route_is_404() {
    let f = Fixture::new();
    let (code, _) = call(f.app(), "GET", "/nope", Body::empty()).await;
    assert_eq!(code, StatusCode::NOT_FOUND);
}
