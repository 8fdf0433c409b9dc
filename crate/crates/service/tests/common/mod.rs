#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use sigsynth_core::domain::{CanvasPoint, EnvironmentConfig, ProblemSpec};
use sigsynth_core::gateway::{FixtureBackend, FixtureStore};
use sigsynth_core::pipeline::Synthesizer;
use sigsynth_core::prompting::TemplateSet;
use sigsynth_service::api::{router, AppState};
use sigsynth_service::store::SignalStore;
use sigsynth_service::table::load_table;
use tower::ServiceExt;

pub fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixtures() -> Arc<FixtureStore> {
    Arc::new(FixtureStore::open(root().join("fixtures/completions.jsonl")).unwrap())
}

pub fn fixture_synth() -> Synthesizer {
    let templates = TemplateSet::load_dir(root().join("templates/v1")).unwrap();
    Synthesizer::new(Arc::new(FixtureBackend::new(fixtures())), templates, EnvironmentConfig::default())
}

pub fn testset_rows() -> Vec<ProblemSpec> {
    load_table(root().join("data/testset.csv")).unwrap()
}

pub fn z_problem() -> ProblemSpec {
    ProblemSpec {
        structure: "Z".into(),
        object_description: "Rocket".into(),
        object_color: "Red".into(),
        goal_position: CanvasPoint::new(496, 100),
        goal_orientation: "35 deg".into(),
        instruction: "insert from right".into(),
    }
}

pub fn app_with(store: Arc<SignalStore>, ui_dir: Option<PathBuf>) -> Router {
    let synth = fixture_synth();
    let projector = AppState::identity_projector(synth.env());
    router(AppState {
        synth: Arc::new(synth),
        store,
        table: Arc::new(testset_rows()),
        projector,
        backend: "fixture".into(),
        ui_dir,
    })
}

pub async fn send(app: &Router, method: &str, uri: &str, body: Option<serde_json::Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(serde_json::to_vec(&v).unwrap())
        }
        None => Body::empty(),
    };
    let res = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = res.status();
    let bytes = axum::body::to_bytes(res.into_body(), usize::MAX).await.unwrap();
    (status, bytes.to_vec())
}

pub async fn send_json(app: &Router, method: &str, uri: &str, body: Option<serde_json::Value>) -> (StatusCode, serde_json::Value) {
    let (status, bytes) = send(app, method, uri, body).await;
    let v = if bytes.is_empty() { serde_json::Value::Null } else { serde_json::from_slice(&bytes).unwrap_or(serde_json::Value::Null) };
    (status, v)
}
